use prosoctl::nnet::Matrix;
use prosoctl::s2s_loss::{delta, multitask_loss, LossInputs, LPC_DIM, MEL_DIM};

fn ramp(frames: usize, width: usize, step: f64) -> Matrix {
    Matrix::from_vec(frames, width, (0..frames * width).map(|i| step * (i / width) as f64).collect()).unwrap()
}

fn main() -> anyhow::Result<()> {
    let frames = 50;
    let mel_target = ramp(frames, MEL_DIM, 0.01);
    let lpc_target = ramp(frames, LPC_DIM, 0.02);

    // a post-net that gets the level right on average but jitters frame to frame
    let mut jittery = lpc_target.clone();
    for (i, v) in jittery.data_mut().iter_mut().enumerate() {
        *v += if (i / LPC_DIM) % 2 == 0 { 0.05 } else { -0.05 };
    }
    // one that is smooth but biased
    let mut biased = lpc_target.clone();
    biased.data_mut().iter_mut().for_each(|v| *v += 0.05);

    for (name, post) in [("jittery", jittery), ("biased", biased)] {
        let inputs = LossInputs::new(mel_target.clone(), mel_target.clone(), lpc_target.clone(), post.clone(), lpc_target.clone())?;
        let d = delta(&post)?;
        println!(
            "{name:<8} loss {:.5}  (largest frame-to-frame step {:.3})",
            multitask_loss(&inputs)?,
            d.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
        );
    }
    Ok(())
}
