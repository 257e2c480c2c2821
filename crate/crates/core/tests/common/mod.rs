#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use appga::simulator::{
    make_phantom, scaled_total_counts, simulate_acquisition, Acquisition, NoiseProtocol, PhantomSpec, ScanGeometry,
    PSF_FWHM_MM, WATER_MU_PER_CM,
};
use appga::{Problem, RegWeights, SmoothingParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| r.random_range(lo..hi)).collect()
}

pub fn acquisition(n: usize, seed: u64) -> Acquisition {
    let geom = ScanGeometry::desk_for(n);
    let (phantom, _) = make_phantom(&PhantomSpec::default(), n).unwrap();
    let noise = NoiseProtocol::paper(scaled_total_counts(n), seed);
    simulate_acquisition(&phantom, &geom, &noise, PSF_FWHM_MM, WATER_MU_PER_CM).unwrap()
}

pub fn uniform_problem(acq: &Acquisition) -> Problem {
    acq.problem(RegWeights::new(0.4, 0.0).unwrap(), SmoothingParams::new(1e-3).unwrap())
        .unwrap()
}
