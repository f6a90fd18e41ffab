// temporary calibration probe; deleted before finalizing
use mgin_core::classical::{q_function, theoretical_msk_ber};
use mgin_core::e2e::{ber_eval, EvalOptions, FadingKind, System};

#[test]
#[ignore]
fn probe_gaussian_limit_offsets() {
    let sweep: Vec<f64> = (4..=10).map(|x| x as f64).collect();
    let pts = ber_eval(
        &System::MskGaussian,
        &sweep,
        1.5,
        1e-9,
        2_000_000,
        FadingKind::Off,
        1234,
        &EvalOptions::default(),
    )
    .unwrap();
    for p in &pts {
        let theory = theoretical_msk_ber(p.ebn0_db);
        // horizontal offset: where does the reference curve hit the measured ber?
        let x_ref = {
            let mut lo = -10.0;
            let mut hi = 30.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if theoretical_msk_ber(mid) > p.ber {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        println!(
            "ebn0={:4.1}  ber={:.3e} (theory {:.3e}, ratio {:.2})  offset={:+.3} dB  errors={}",
            p.ebn0_db,
            p.ber,
            theory,
            p.ber / theory,
            p.ebn0_db - x_ref,
            p.errors
        );
    }
    let _ = q_function(1.0);
}

use mgin_core::cns::{train_cns, GanConfig};
use mgin_core::noise::{empirical_w1, fill_mgin, stream, MginParams};

#[test]
#[ignore]
fn probe_cns_training() {
    let lambda: f64 = std::env::var("PROBE_LAMBDA").unwrap_or("1.0".into()).parse().unwrap();
    let a1: f32 = std::env::var("PROBE_A1").unwrap_or("0.1".into()).parse().unwrap();
    let a2: f32 = std::env::var("PROBE_A2").unwrap_or("1.0".into()).parse().unwrap();
    let epochs: usize = std::env::var("PROBE_EPOCHS").unwrap_or("20".into()).parse().unwrap();
    let lr: f32 = std::env::var("PROBE_LR").unwrap_or("5e-5".into()).parse().unwrap();
    {
        let params = MginParams::from_gsnr(0.0, lambda, 1.5, 1.0).unwrap();
        let cfg = GanConfig { alpha1: a1, alpha2: a2, lr, ..GanConfig::default() };
        let t0 = std::time::Instant::now();
        let model = train_cns(&cfg, &params, epochs, 42).unwrap();
        println!("lambda={lambda}: trained {} epochs in {:?}", model.history.len(), t0.elapsed());
        for h in model.history.iter().step_by(4) {
            println!("  epoch {:2}  L_D {:+.4}  L_G {:+.4}  W1(raw) {:.4}", h.epoch, h.loss_d, h.loss_g, h.w1);
        }
        // normalized-space W1 at 1e5 elements
        let rows = 100_000 / 256 + 1;
        let g = mgin_core::cns::sample_cns(&model, rows, 777);
        let gn = model.norm.normalize(g.data());
        let mut fresh = vec![0.0f64; gn.len()];
        fill_mgin(&params, &mut fresh, &mut stream(888, 0));
        let fn_ = model.norm.normalize(&fresh);
        let a: Vec<f64> = gn.iter().map(|&x| x as f64).collect();
        let b: Vec<f64> = fn_.iter().map(|&x| x as f64).collect();
        println!("  normalized W1 = {:.5}", empirical_w1(&a, &b).unwrap());
    }
}
