// temporary perf probe; deleted before finalizing
use mgin_core::tensor::kernels;
use std::time::Instant;

fn bench(name: &str, flops_per_iter: f64, iters: usize, mut f: impl FnMut()) {
    let t0 = Instant::now();
    for _ in 0..iters {
        f();
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("{name}: {:.2} GFLOP/s  ({:.2} ms/iter)", flops_per_iter * iters as f64 / dt / 1e9, dt * 1e3 / iters as f64);
}

#[test]
#[ignore]
fn probe_kernels() {
    // generator-sized matmul: 128x512 * 512x256
    let a = vec![0.5f32; 128 * 512];
    let b = vec![0.25f32; 512 * 256];
    let mut out = vec![0.0f32; 128 * 256];
    bench("matmul 128x512x256", 2.0 * 128.0 * 512.0 * 256.0, 50, || {
        kernels::matmul(&a, &b, 128, 512, 256, &mut out);
    });
    // detector-sized conv: B=128, Cin=128, L=128, Cout=256, K=3
    let x = vec![0.5f32; 128 * 128 * 128];
    let w = vec![0.25f32; 256 * 128 * 3];
    let bias = vec![0.0f32; 256];
    let mut co = vec![0.0f32; 128 * 256 * 128];
    bench("conv1d 128x128x128 -> 256 k3", 2.0 * 128.0 * 256.0 * 128.0 * 3.0 * 128.0, 3, || {
        kernels::conv1d(&x, &w, &bias, 128, 128, 128, 256, 3, 1, &mut co);
    });
    bench("conv1d grad_w", 2.0 * 128.0 * 256.0 * 128.0 * 3.0 * 128.0, 3, || {
        kernels::conv1d_grad_w(&x, &co, 128, 128, 128, 256, 3, 1, &mut w.clone());
    });
    bench("conv1d grad_x", 2.0 * 128.0 * 256.0 * 128.0 * 3.0 * 128.0, 3, || {
        kernels::conv1d_grad_x(&co, &w, 128, 128, 128, 256, 3, 1, &mut x.clone());
    });
}
