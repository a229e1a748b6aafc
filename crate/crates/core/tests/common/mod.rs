#![allow(dead_code)]

use hetsched::channel::{complex_gaussian, kronecker_channel, received_power, UserChannel, UserDraw};
use hetsched::subspace::CMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// I.i.d. Rayleigh user with unit large-scale gain.
pub fn iid_user(id: usize, receive: usize, transmit: usize, rng: &mut ChaCha8Rng) -> UserChannel {
    UserChannel::new(id, 1.0, complex_gaussian(receive, transmit, rng))
}

/// User with random distance and Kronecker correlation.
pub fn kronecker_user(id: usize, receive: usize, transmit: usize, rng: &mut ChaCha8Rng) -> UserChannel {
    let draw = UserDraw {
        antennas: receive,
        distance: rng.random_range(200.0..=1000.0),
        receive_correlation: rng.random_range(0.0..=1.0),
        transmit_correlation: rng.random_range(0.0..=1.0),
    };
    let rho = received_power(1.0, transmit, draw.distance, 3.0, 200.0).unwrap();
    UserChannel::new(id, rho, kronecker_channel(&draw, transmit, rng).unwrap())
}

/// Random receive-antenna counts whose sum stays within `transmit`.
pub fn feasible_antennas(transmit: usize, max_users: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::new();
    let mut left = transmit;
    while out.len() < max_users && left > 0 {
        let n = rng.random_range(1..=left.min(4));
        out.push(n);
        left -= n;
        if out.len() >= 2 && rng.random_bool(0.3) {
            break;
        }
    }
    out
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    complex_gaussian(n, n, rng).qr().q()
}

/// Kendall's τ-a between two score vectors.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut sum = 0.0;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            pairs += 1.0;
        }
    }
    sum / pairs
}

pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {id:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
