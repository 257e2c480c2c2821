use crate::grid::Image;

/// `σ` in pixels for a Gaussian of the given FWHM.
pub fn sigma_pixels(fwhm_mm: f64, pixel_mm: f64) -> f64 {
    (fwhm_mm / pixel_mm) / (8.0 * std::f64::consts::LN_2).sqrt()
}

/// Sampled, normalised 1D Gaussian truncated at `±4σ`.
fn kernel(sigma: f64) -> Vec<f64> {
    let half = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with zero padding. `fwhm_mm = 0` returns a copy.
pub fn gaussian_blur(img: &Image, fwhm_mm: f64, pixel_mm: f64) -> Image {
    if fwhm_mm <= 0.0 {
        return img.clone();
    }
    let k = kernel(sigma_pixels(fwhm_mm, pixel_mm));
    let half = (k.len() / 2) as isize;
    let n = img.side();
    let src = img.as_slice();
    let mut tmp = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (t, &w) in k.iter().enumerate() {
                let cc = c as isize + t as isize - half;
                if cc >= 0 && (cc as usize) < n {
                    acc += w * src[r * n + cc as usize];
                }
            }
            tmp[r * n + c] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (t, &w) in k.iter().enumerate() {
                let rr = r as isize + t as isize - half;
                if rr >= 0 && (rr as usize) < n {
                    acc += w * tmp[rr as usize * n + c];
                }
            }
            out[r * n + c] = acc;
        }
    }
    Image::new(n, out).expect("same size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fwhm_is_identity() {
        let img = Image::from_fn(8, |r, c| (r * 8 + c) as f64);
        assert_eq!(gaussian_blur(&img, 0.0, 1.0), img);
    }

    #[test]
    fn delta_response_has_target_fwhm() {
        let n = 65;
        let mut img = Image::zeros(n);
        img.as_mut_slice()[32 * n + 32] = 1.0;
        // σ ≈ 3 px
        let fwhm = 3.0 * (8.0 * std::f64::consts::LN_2).sqrt();
        let out = gaussian_blur(&img, fwhm, 1.0);
        let row = out.row(32);
        let peak = row[32];
        // Linear interpolation of the half-maximum crossing on the right.
        let mut c = 32;
        while row[c + 1] > 0.5 * peak {
            c += 1;
        }
        let frac = (row[c] - 0.5 * peak) / (row[c] - row[c + 1]);
        let measured = 2.0 * ((c - 32) as f64 + frac);
        assert!((measured - fwhm).abs() / fwhm < 0.05, "{measured} vs {fwhm}");
        assert!((out.sum() - 1.0).abs() < 1e-12);
    }
}
