//! Emulated kernels against the pure golden models, over random inputs and
//! both supported problem sizes per kernel.

mod common;

use proptest::prelude::*;

use m1_core::emu::DmaConfig;
use m1_core::kernels::{
    golden_matmul, golden_scale, golden_translate, golden_vector_add, golden_vector_scale,
    pack_points, run_kernel, unpack_points, KernelInputs, KernelSpec, Vec2,
};

fn arb_elems(n: usize) -> impl Strategy<Value = Vec<i16>> {
    prop::collection::vec(-256i16..256, n)
}

fn arb_matrix(n: usize) -> impl Strategy<Value = Vec<Vec<i16>>> {
    prop::collection::vec(arb_elems(n), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn translate_matches_golden(size in prop::sample::select(vec![8u32, 64]),
                                seed in any::<u64>()) {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(seed);
        let u: Vec<i16> = (0..size).map(|_| rng.random_range(-256..=255)).collect();
        let v: Vec<i16> = (0..size).map(|_| rng.random_range(-256..=255)).collect();
        let run = run_kernel(
            &KernelSpec::translate(size),
            &KernelInputs::Translate { u: u.clone(), v: v.clone() },
            DmaConfig::default(),
        ).unwrap();
        prop_assert_eq!(run.values.as_vector().unwrap(), golden_vector_add(&u, &v).wrapped);
    }

    #[test]
    fn scale_matches_golden(size in prop::sample::select(vec![8u32, 64]),
                            constant in -256i16..256,
                            u in arb_elems(64)) {
        let u = u[..size as usize].to_vec();
        let run = run_kernel(
            &KernelSpec::scale(size, constant),
            &KernelInputs::Scale { u: u.clone() },
            DmaConfig::default(),
        ).unwrap();
        prop_assert_eq!(run.values.as_vector().unwrap(), golden_vector_scale(constant, &u).wrapped);
    }

    #[test]
    fn matmul_matches_golden(size in prop::sample::select(vec![4u32, 8]),
                             a in arb_matrix(8), b in arb_matrix(8)) {
        let shrink = |m: &[Vec<i16>]| -> Vec<Vec<i16>> {
            m[..size as usize].iter().map(|r| r[..size as usize].to_vec()).collect()
        };
        let (a, b) = (shrink(&a), shrink(&b));
        let run = run_kernel(
            &KernelSpec::matmul(size),
            &KernelInputs::MatMul { a: a.clone(), b: b.clone() },
            DmaConfig::default(),
        ).unwrap();
        prop_assert_eq!(run.values.as_matrix().unwrap(), golden_matmul(&a, &b).wrapped);
    }

    /// The point-set wrappers agree with running the flat kernels on packed
    /// coordinates.
    #[test]
    fn packed_points_route_through_vector_kernels(pts in prop::collection::vec((-256i16..256, -256i16..256), 32),
                                                  t in (-256i16..256, -256i16..256)) {
        let points: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let t = Vec2::new(t.0, t.1);
        let flat_u = pack_points(&points);
        let flat_v = pack_points(&vec![t; points.len()]);
        let run = run_kernel(
            &KernelSpec::translate(64),
            &KernelInputs::Translate { u: flat_u, v: flat_v },
            DmaConfig::default(),
        ).unwrap();
        let moved = unpack_points(run.values.as_vector().unwrap());
        prop_assert_eq!(moved, golden_translate(&points, t).wrapped);
    }

    /// Uniform scaling through the kernel equals the 2-D golden scale with
    /// equal axis factors.
    #[test]
    fn packed_scaling_is_uniform_2d_scaling(pts in prop::collection::vec((-256i16..256, -256i16..256), 32),
                                            c in -256i16..256) {
        let points: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let run = run_kernel(
            &KernelSpec::scale(64, c),
            &KernelInputs::Scale { u: pack_points(&points) },
            DmaConfig::default(),
        ).unwrap();
        let scaled = unpack_points(run.values.as_vector().unwrap());
        prop_assert_eq!(scaled, golden_scale(&points, c, c).wrapped);
    }
}

/// Right-angle rotation expressed as an integer rotation block embedded in
/// an identity matrix, run through the matmul kernel.
#[test]
fn right_angle_rotation_as_matmul() {
    let n = 8usize;
    // Rows 0 and 1 of B hold the x and y coordinates of four points.
    let xs = [3i16, -7, 100, 0];
    let ys = [4i16, 2, -50, 9];
    let mut b = vec![vec![0i16; n]; n];
    b[0][..4].copy_from_slice(&xs);
    b[1][..4].copy_from_slice(&ys);
    for &(deg, c, s) in &[(0i32, 1i16, 0i16), (90, 0, 1), (180, -1, 0), (270, 0, -1)] {
        // A = identity with the top-left 2x2 replaced by the rotation block
        // [[cos, -sin], [sin, cos]].
        let mut a = vec![vec![0i16; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1;
        }
        a[0][0] = c;
        a[0][1] = -s;
        a[1][0] = s;
        a[1][1] = c;
        let run = run_kernel(
            &KernelSpec::matmul(8),
            &KernelInputs::MatMul {
                a: a.clone(),
                b: b.clone(),
            },
            DmaConfig::default(),
        )
        .unwrap();
        let got = run.values.as_matrix().unwrap().to_vec();
        assert_eq!(got, golden_matmul(&a, &b).wrapped, "{deg} degrees");
        for j in 0..4 {
            let p = m1_core::kernels::trig::rotate_q14(Vec2::new(xs[j], ys[j]), deg);
            assert_eq!(
                (got[0][j], got[1][j]),
                (p.x, p.y),
                "{deg} degrees, point {j}"
            );
        }
    }
}
