use dtvct::decompose::{decompose, decompose_from, decomposition_regularizer, validate_alpha, DecompParams};
use dtvct::diffops::{dtv, DtvParams};
use dtvct::fbp::{fbp_reconstruct, FbpConfig};
use dtvct::io;
use dtvct::pdhg::SolveConfig;
use dtvct::phantom::{add_noise, crack_mask, make_phantom, support_mask, NoiseSpec, PhantomSpec};
use dtvct::projector::forward_project;
use dtvct::split::{split_fbp, split_sinogram, split_variational, SplitParams, SplitSpec};
use dtvct::{Error, Geometry, Image, Sinogram};
use proptest::prelude::*;

fn random_sinogram(geom: &Geometry, seed: u64) -> Sinogram {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Sinogram::from_data(geom.clone(), (0..geom.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn split_parts_rebuild_the_sinogram(n in 4usize..40, half in 1usize..10, main in 0usize..40, seed in any::<u64>()) {
        let k = 2 * half;
        prop_assume!(k + 1 < n && main < n);
        let geom = Geometry::parallel(8, 8, n).unwrap();
        let sin = random_sinogram(&geom, seed);
        let spec = SplitSpec { main_index: main, k };
        let (b1, b2) = split_sinogram(&sin, &spec).unwrap();
        prop_assert_eq!(b1.geometry().n_angles(), k + 1);
        prop_assert_eq!(b2.geometry().n_angles(), n - k - 1);
        prop_assert_eq!(Sinogram::merge(&b1, &b2).unwrap(), sin);
    }

    #[test]
    fn fbp_split_sums_to_full_fbp(seed in any::<u64>(), k in prop::sample::select(vec![2usize, 10, 40])) {
        let geom = Geometry::parallel(32, 32, 60).unwrap();
        let sin = random_sinogram(&geom, seed);
        let cfg = FbpConfig::default();
        let r = split_fbp(&sin, &SplitSpec { main_index: 7, k }, &cfg).unwrap();
        let full = fbp_reconstruct(&sin, &cfg).unwrap();
        prop_assert!(rel_diff(r.u.sum(&r.v).unwrap().data(), full.data()) <= 1e-8);
    }

    #[test]
    fn alpha_bound_matches_expanded_inequality(a_u in 0.01f64..0.99, a_v in 0.01f64..0.99, alpha in 0.0f64..3.0) {
        prop_assert_eq!(validate_alpha(a_u, a_v, alpha), a_u < alpha && alpha < 1.0 / a_v);
    }
}

#[test]
fn alpha_bound_for_default_widths() {
    assert!(!validate_alpha(0.15, 0.5, 0.15));
    assert!(!validate_alpha(0.15, 0.5, 2.0));
    for alpha in [0.16, 0.7, 1.0, 1.99] {
        assert!(validate_alpha(0.15, 0.5, alpha));
    }
}

#[test]
fn invalid_decomposition_parameters_are_param_errors() {
    let geom = Geometry::parallel(16, 16, 10).unwrap();
    let sin = Sinogram::zeros(geom);
    for p in [
        DecompParams::new(0.01, 2.5, 1e-4, 20.0),
        DecompParams::new(0.01, 0.1, 1e-4, 20.0),
        DecompParams::new(-1.0, 0.7, 1e-4, 20.0),
        DecompParams::new(0.01, 0.7, 0.0, 20.0),
    ] {
        assert!(matches!(decompose(&sin, &p, &SolveConfig::default()), Err(Error::Param(_))));
    }
}

#[test]
fn decomposition_regularizer_is_the_weighted_sum() {
    let u = make_phantom(&PhantomSpec::fibre(24, 20.0, 1)).unwrap();
    let v = make_phantom(&PhantomSpec::fibre(24, 110.0, 2)).unwrap();
    let p = DecompParams::new(0.01, 0.7, 1e-4, 20.0);
    let want = dtv(&u, &DtvParams::new(20.0, 0.15).unwrap()) + 0.7 * dtv(&v, &DtvParams::new(110.0, 0.5).unwrap());
    assert!((decomposition_regularizer(&u, &v, &p).unwrap() - want).abs() <= 1e-12 * want);
}

#[test]
fn small_decomposition_reproduces_data_and_converges() {
    let m = 48;
    let spec = PhantomSpec::fibre_crack(m, 20.0, 5);
    let truth = make_phantom(&spec).unwrap();
    let geom = Geometry::parallel(m, m, 32).unwrap();
    let b = forward_project(&truth, &geom).unwrap();
    let d = decompose(&b, &DecompParams::new(0.004, 0.7, 1e-4, 20.0), &SolveConfig::default()).unwrap();
    assert!(d.report.converged);
    assert!(d.u.data().iter().all(|&x| x >= 0.0));
    let fit = forward_project(&d.sum(), &geom).unwrap();
    assert!(rel_diff(fit.data(), b.data()) < 0.05);
    // Starting from the solution changes little.
    let again = decompose_from(&b, &DecompParams::new(0.004, 0.7, 1e-4, 20.0), &SolveConfig::default(), Some((&d.u, &d.v))).unwrap();
    assert!(rel_diff(again.sum().data(), d.sum().data()) < 1e-2);
}

#[test]
fn variational_split_keeps_components_nonnegative() {
    let m = 48;
    let truth = make_phantom(&PhantomSpec::fibre_crack(m, 20.0, 5)).unwrap();
    let geom = Geometry::parallel(m, m, 32).unwrap();
    let b = add_noise(&forward_project(&truth, &geom).unwrap(), &NoiseSpec { level: 0.01, seed: 1 }).unwrap();
    let params = SplitParams { lambda_u: 0.004, lambda_v: 0.004, beta: 1e-4, dtv: DtvParams::new(20.0, 0.15).unwrap() };
    let main = geom.nearest_angle_index(20.0).unwrap();
    let r = split_variational(&b, &SplitSpec { main_index: main, k: 6 }, &params, &SolveConfig::default()).unwrap();
    let (ru, rv) = r.reports.unwrap();
    assert!(ru.converged && rv.converged);
    assert!(r.u.data().iter().chain(r.v.data()).all(|&x| x >= 0.0));
}

#[test]
fn masks_lie_inside_the_support() {
    let spec = PhantomSpec::fibre_crack(64, 20.0, 9);
    let support = support_mask(64);
    let crack = crack_mask(&spec);
    assert!(crack.iter().any(|&c| c));
    assert!(crack.iter().zip(&support).all(|(&c, &s)| !c || s));
    let img = make_phantom(&spec).unwrap();
    let inscribed = Image::disk_mask(64, 32.0);
    assert!(img.data().iter().zip(&inscribed).all(|(&v, &s)| s || v == 0.0));
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = make_phantom(&PhantomSpec::fibre(20, 33.0, 2)).unwrap();
    let geom = Geometry::parallel(20, 24, 9).unwrap();
    let sin = forward_project(&img, &geom).unwrap();
    io::write_image(dir.path().join("x.tim"), &img).unwrap();
    io::write_sinogram(dir.path().join("b.tsg"), &sin).unwrap();
    assert_eq!(io::read_image(dir.path().join("x.tim")).unwrap(), img);
    let back = io::read_sinogram(dir.path().join("b.tsg"), Some(20)).unwrap();
    // payload is single precision
    assert!(back.data().iter().zip(sin.data()).all(|(a, b)| *a == *b as f32 as f64));
    assert_eq!(back.geometry().angles_deg(), sin.geometry().angles_deg());
    assert!(matches!(io::read_image(dir.path().join("b.tsg")), Err(Error::Format(_))));
    assert!(matches!(io::read_image(dir.path().join("missing.tim")), Err(Error::Io(_))));
}

#[test]
fn image_sum_checks_sizes() {
    assert!(matches!(Image::zeros(3).sum(&Image::zeros(4)), Err(Error::Dimension(_))));
}
