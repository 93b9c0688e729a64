fn main() {
    std::process::exit(prosoctl::cli::main_with_args(std::env::args_os()));
}
