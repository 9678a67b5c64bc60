use itertools_free::permutations;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{finite_difference_gradient, relative_error, ParamStore};
use crate::geometry::dist;

mod itertools_free {
    /// All permutations of `0..m` (Heap's algorithm).
    pub fn permutations(m: usize) -> Vec<Vec<usize>> {
        fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k <= 1 {
                out.push(a.clone());
                return;
            }
            heap(k - 1, a, out);
            for i in 0..k - 1 {
                if k.is_multiple_of(2) {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
                heap(k - 1, a, out);
            }
        }
        let mut out = Vec::new();
        heap(m, &mut (0..m).collect(), &mut out);
        out
    }
}

fn random_points(rng: &mut ChaCha8Rng, m: usize) -> Vec<Point3> {
    (0..m)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect()
}

fn brute_force_emd(a: &[Point3], b: &[Point3]) -> f64 {
    permutations(a.len())
        .iter()
        .map(|perm| a.iter().zip(perm).map(|(p, &j)| dist(p, &b[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / a.len() as f64
}

#[test]
fn permutation_enumeration_has_factorial_size() {
    assert_eq!(permutations(6).len(), 720);
}

#[test]
fn emd_exact_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_points(&mut rng, 9);
    assert_eq!(emd_exact(&a, &a).unwrap(), 0.0);
    assert_eq!(emd_exact(&[[0.0; 3]], &[[3.0, 4.0, 0.0]]).unwrap(), 5.0);
    assert!(emd_exact(&a, &a[..3]).is_err());
}

#[test]
fn emd_exact_matches_permutation_minimum_at_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let (a, b) = (random_points(&mut rng, 6), random_points(&mut rng, 6));
        assert!((emd_exact(&a, &b).unwrap() - brute_force_emd(&a, &b)).abs() < 1e-9);
    }
}

#[test]
fn emd_is_symmetric_and_rigid_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = (random_points(&mut rng, 30), random_points(&mut rng, 30));
    let ab = emd_exact(&a, &b).unwrap();
    assert!((ab - emd_exact(&b, &a).unwrap()).abs() < 1e-12);
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let motion = |p: &Point3| [c * p[0] - s * p[1] + 2.0, s * p[0] + c * p[1] - 1.0, p[2] + 0.5];
    let ra: Vec<Point3> = a.iter().map(motion).collect();
    let rb: Vec<Point3> = b.iter().map(motion).collect();
    assert!((ab - emd_exact(&ra, &rb).unwrap()).abs() < 1e-9);
}

#[test]
fn emd_approx_bounds_exact_within_five_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in [2, 5, 16, 64] {
        for _ in 0..5 {
            let (a, b) = (random_points(&mut rng, m), random_points(&mut rng, m));
            let exact = emd_exact(&a, &b).unwrap();
            let approx = emd_approx(&a, &b, 8).unwrap();
            assert!(approx >= exact - 1e-12, "{approx} < {exact}");
            assert!(approx <= 1.05 * exact, "m={m}: {approx} vs {exact}");
            assert_eq!(approx, emd_approx(&a, &b, 8).unwrap());
        }
    }
    let a = random_points(&mut rng, 10);
    assert_eq!(emd_approx(&a, &a, 8).unwrap(), 0.0);
}

#[test]
fn lambda_schedule_endpoints() {
    assert_eq!(lambda_schedule(0, 100), 0.01);
    assert_eq!(lambda_schedule(100, 100), 1.0);
    assert!((lambda_schedule(50, 100) - 0.505).abs() < 1e-15);
    let mut last = 0.0;
    for e in 0..=40 {
        let l = lambda_schedule(e, 40);
        assert!(l >= last);
        last = l;
    }
}

fn loss_value(coarse: &[Point3], refined: &[Point3], gt: &[Point3], lambda: f64) -> f64 {
    let mut g = Graph::inference();
    let c = g.constant(Tensor::from_points(coarse));
    let r = g.constant(Tensor::from_points(refined));
    let l = reconstruction_loss(&mut g, c, r, gt, lambda, EmdReduction::Mean).unwrap();
    g.value(l).item().unwrap()
}

#[test]
fn reconstruction_loss_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (q, other, gt) = (random_points(&mut rng, 12), random_points(&mut rng, 12), random_points(&mut rng, 12));
    assert_eq!(loss_value(&q, &q, &q, 0.7), 0.0);
    assert_eq!(loss_value(&q, &other, &gt, 0.0), emd_exact(&q, &gt).unwrap());
    let mut last = -1.0;
    for lambda in [0.0, 0.1, 0.5, 1.0] {
        let v = loss_value(&q, &other, &gt, lambda);
        assert!(v >= 0.0 && v >= last);
        last = v;
    }
}

#[test]
fn reconstruction_loss_rejects_size_mismatch() {
    let mut g = Graph::new();
    let c = g.constant(Tensor::from_points(&[[0.0; 3]; 4]));
    assert!(reconstruction_loss(&mut g, c, c, &[[0.0; 3]; 3], 1.0, EmdReduction::Mean).is_err());
}

#[test]
fn refined_gradient_is_scaled_unit_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = 10;
    let (coarse, refined, gt) = (random_points(&mut rng, m), random_points(&mut rng, m), random_points(&mut rng, m));
    let lambda = 0.3;
    let mut params = ParamStore::new();
    params.insert("q", Tensor::from_points(&refined));

    let build = |g: &mut Graph, p: &ParamStore| {
        let c = g.constant(Tensor::from_points(&coarse));
        let r = g.param("q", p.get("q").unwrap());
        reconstruction_loss(g, c, r, &gt, lambda, EmdReduction::Mean)
    };
    let mut g = Graph::new();
    let loss = build(&mut g, &params).unwrap();
    let analytic = g.backward(loss).unwrap();

    // closed form: lambda / m times the unit vector away from the match
    let assignment = optimal_assignment(&refined, &gt).unwrap();
    let grad = analytic.get("q").unwrap().to_points().unwrap();
    for (i, p) in refined.iter().enumerate() {
        let t = gt[assignment[i]];
        let d = dist(p, &t);
        for k in 0..3 {
            let expect = lambda / m as f64 * (p[k] - t[k]) / d;
            assert!((grad[i][k] - expect).abs() < 1e-12);
        }
    }

    let numeric = finite_difference_gradient(
        |p| {
            let mut g = Graph::inference();
            let l = build(&mut g, p)?;
            Ok(g.value(l).item().unwrap())
        },
        &params,
        1e-6,
    )
    .unwrap();
    let err = relative_error(&analytic, &numeric, 1e-8).unwrap();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn sum_reduction_scales_by_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b) = (random_points(&mut rng, 8), random_points(&mut rng, 8));
    let mut g = Graph::inference();
    let v = g.constant(Tensor::from_points(&a));
    let mean = emd_term(&mut g, v, &b, EmdReduction::Mean).unwrap();
    let sum = emd_term(&mut g, v, &b, EmdReduction::Sum).unwrap();
    let (mean, sum) = (g.value(mean).item().unwrap(), g.value(sum).item().unwrap());
    assert!((sum - 8.0 * mean).abs() < 1e-12);
}
