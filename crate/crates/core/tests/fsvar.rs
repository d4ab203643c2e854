mod common;

use funlp::covops::{spectrum_sym, Panel, TauRule};
use funlp::flp::{hac_longrun, EstimateOptions, HacSpec};
use funlp::fsvar::{
    fof_estimate, fof_inference, fof_scores, identify_structural, invert_b, sirf, sirf_apply, structural_to_reduced,
    FofData, ReducedModel, Scheme, StructuralModel,
};
use funlp::hilbert::{BasisSpec, FunctionElement, OperatorMatrix, ProductElement};
use funlp::simlab::{rep_rng, Dgp, SvarDgp};
use funlp::{Error, Execution};
use nalgebra::{DMatrix, DVector};

use common::{centered, dense_ols, gauss_matrix, gauss_vector, random_structural, rng};

fn b_matrix(basis: &std::sync::Arc<BasisSpec>, b12: &DVector<f64>, b21: &DVector<f64>) -> OperatorMatrix {
    StructuralModel::contemporaneous(basis.clone(), b12, b21).unwrap()
}

#[test]
fn invert_b_examples() {
    let basis = BasisSpec::fourier(5).unwrap();
    let zero = DVector::zeros(5);
    let id = invert_b(&b_matrix(&basis, &zero, &zero)).unwrap();
    assert_eq!(id.dense(), &DMatrix::identity(6, 6));

    let mut r = rng(1);
    let b21 = gauss_vector(&mut r, 5);
    let b = b_matrix(&basis, &zero, &b21);
    let inv = invert_b(&b).unwrap();
    let mut expected = DMatrix::identity(6, 6);
    expected.view_mut((1, 0), (5, 1)).copy_from(&(-&b21));
    assert!((inv.dense() - &expected).amax() < 1e-15);
    assert!((b.compose(&inv).unwrap().dense() - DMatrix::identity(6, 6)).amax() < 1e-13);

    for _ in 0..50 {
        let b12 = gauss_vector(&mut r, 5);
        let mut b21 = gauss_vector(&mut r, 5);
        let prod = b12.dot(&b21);
        if prod.abs() >= 0.9 {
            b21 *= 0.5 / prod.abs();
        }
        let b = b_matrix(&basis, &b12, &b21);
        let inv = invert_b(&b).unwrap();
        assert!((b.compose(&inv).unwrap().dense() - DMatrix::identity(6, 6)).amax() < 1e-12);
    }
}

#[test]
fn reduced_form_of_unit_structure() {
    let basis = BasisSpec::fourier(3).unwrap();
    let mut r = rng(2);
    let zero = DVector::zeros(3);
    let a = OperatorMatrix::from_dense(1, basis.clone(), gauss_matrix(&mut r, 4, 4) * 0.2).unwrap();
    let l = gauss_matrix(&mut r, 3, 3);
    let s = StructuralModel { b: b_matrix(&basis, &zero, &zero), a: a.clone(), sigma11: 1.3, sigma22: &l * l.transpose() };
    let red = structural_to_reduced(&s).unwrap();
    assert!((red.gamma.dense() - a.dense()).amax() < 1e-15);
    assert!((red.sigma_eps.dense() - s.shock_covariance().dense()).amax() < 1e-15);
}

#[test]
fn reduced_shock_covariance_blocks_when_scalar_is_predetermined() {
    let basis = BasisSpec::fourier(5).unwrap();
    let mut r = rng(3);
    let s = random_structural(&mut r, &basis, true, 5, 0.8);
    let red = structural_to_reduced(&s).unwrap();
    let se = &red.sigma_eps;
    let b21 = s.beta21();
    let s11 = s.sigma11;
    assert!((se.a11()[(0, 0)] - s11).abs() < 1e-14);
    assert!((se.a12().row(0).transpose() + &b21 * s11).amax() < 1e-14);
    assert!((se.a21().column(0) + &b21 * s11).amax() < 1e-14);
    let s22 = &b21 * s11 * b21.transpose() + &s.sigma22;
    assert!((se.a22() - s22).amax() < 1e-14);
}

#[test]
fn identification_examples() {
    let basis = BasisSpec::fourier(3).unwrap();
    let mut r = rng(4);
    let gamma = OperatorMatrix::from_dense(1, basis.clone(), gauss_matrix(&mut r, 4, 4) * 0.2).unwrap();
    let mut sig = DMatrix::zeros(4, 4);
    sig[(0, 0)] = 2.0;
    let l = gauss_matrix(&mut r, 3, 3);
    sig.view_mut((1, 1), (3, 3)).copy_from(&(&l * l.transpose()));
    let red = ReducedModel { gamma, sigma_eps: OperatorMatrix::from_dense(1, basis.clone(), sig.clone()).unwrap() };
    let id = identify_structural(&red, Scheme::Beta12Zero, None).unwrap();
    assert_eq!(id.model.beta21().amax(), 0.0);
    assert_eq!(id.model.sigma22, sig.view((1, 1), (3, 3)).into_owned());

    for _ in 0..50 {
        let s = random_structural(&mut r, &basis, true, 3, 0.9);
        let id = identify_structural(&structural_to_reduced(&s).unwrap(), Scheme::Beta12Zero, None).unwrap();
        assert!((id.model.beta21() - s.beta21()).amax() < 1e-10);
        assert!((id.model.a.dense() - s.a.dense()).amax() < 1e-10);
        assert!((id.model.sigma11 - s.sigma11).abs() < 1e-10);
        assert!((&id.model.sigma22 - &s.sigma22).amax() < 1e-10);
    }
}

#[test]
fn low_rank_functional_shocks_identify_the_retained_subspace() {
    let basis = BasisSpec::fourier(7).unwrap();
    let (j, k) = (7, 3);
    let s = random_structural(&mut rng(5), &basis, false, k, 0.8);
    let id = identify_structural(&structural_to_reduced(&s).unwrap(), Scheme::Beta21Zero, None).unwrap();
    assert_eq!(id.unidentified_dim, j - k);
    let sp = spectrum_sym(&s.sigma22).unwrap();
    let v = sp.left_vectors.columns(0, k);
    let on_range = |b: DVector<f64>| v.tr_mul(&b);
    assert!((on_range(id.model.beta12()) - on_range(s.beta12())).amax() < 1e-8);
    let off = sp.left_vectors.columns(k, j - k);
    assert!(off.tr_mul(&id.model.beta12()).amax() < 1e-8);
}

#[test]
fn sirf_examples() {
    let basis = BasisSpec::fourier(5).unwrap();
    let s = random_structural(&mut rng(6), &basis, true, 5, 0.8);
    let red = structural_to_reduced(&s).unwrap();
    let binv = invert_b(&s.b).unwrap();
    let table = sirf(&red, &binv, 4).unwrap();
    assert_eq!(table.responses[0], binv);
    assert_eq!(table.horizons(), 4);

    let still = ReducedModel { gamma: OperatorMatrix::zeros(1, basis.clone()), sigma_eps: red.sigma_eps.clone() };
    let flat = sirf(&still, &binv, 3).unwrap();
    for h in 1..=3 {
        assert!(flat.responses[h].dense().iter().all(|&v| v == 0.0));
    }

    let unit = ProductElement::new(DVector::from_element(1, 1.0), FunctionElement::zeros(basis.clone()));
    for h in 0..=4 {
        let resp = sirf_apply(&table, h, &unit).unwrap();
        assert!((resp.w[0] - table.irf11(h)).abs() < 1e-15);
        assert!((resp.x.coeffs() - table.irf21(h).coeffs()).amax() < 1e-15);
    }
    let mut r = rng(7);
    let a = ProductElement::from_coords(1, basis.clone(), &gauss_vector(&mut r, 6)).unwrap();
    let b = ProductElement::from_coords(1, basis.clone(), &gauss_vector(&mut r, 6)).unwrap();
    let sum = ProductElement::from_coords(1, basis, &(a.coords() + b.coords())).unwrap();
    for h in 0..=4 {
        let lhs = sirf_apply(&table, h, &sum).unwrap().coords();
        let rhs = sirf_apply(&table, h, &a).unwrap().coords() + sirf_apply(&table, h, &b).unwrap().coords();
        assert!((lhs - rhs).amax() < 1e-12);
    }
    assert!(matches!(sirf_apply(&table, 5, &a), Err(Error::HorizonOutOfRange { .. })));
}

#[test]
fn scalar_case_matches_bivariate_recursion() {
    let basis = BasisSpec::fourier(1).unwrap();
    let g = [[0.5, 0.2], [-0.1, 0.7]];
    let (b12, b21) = (0.3, -0.4);
    let gamma = OperatorMatrix::from_dense(1, basis.clone(), DMatrix::from_row_slice(2, 2, &[g[0][0], g[0][1], g[1][0], g[1][1]])).unwrap();
    let b = b_matrix(&basis, &DVector::from_element(1, b12), &DVector::from_element(1, b21));
    let red = ReducedModel { gamma, sigma_eps: OperatorMatrix::identity(1, basis) };
    let table = sirf(&red, &invert_b(&b).unwrap(), 6).unwrap();

    let det = 1.0 - b12 * b21;
    let mut psi = [[1.0 / det, -b12 / det], [-b21 / det, 1.0 / det]];
    for h in 0..=6 {
        let got = table.responses[h].dense();
        for i in 0..2 {
            for k in 0..2 {
                assert!((got[(i, k)] - psi[i][k]).abs() < 1e-14, "h={h}");
            }
        }
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                next[i][k] = g[i][0] * psi[0][k] + g[i][1] * psi[1][k];
            }
        }
        psi = next;
    }
}

fn noisy_panel(seed: u64, n: usize, j: usize) -> (Panel, std::sync::Arc<BasisSpec>) {
    let basis = BasisSpec::fourier(j).unwrap();
    let mut r = rng(seed);
    let raw = gauss_matrix(&mut r, n, 2 + j);
    (Panel::new(basis.clone(), &raw.columns(0, 2).into_owned(), &raw.columns(2, j).into_owned()).unwrap(), basis)
}

#[test]
fn noiseless_function_response_is_recovered() {
    let (panel, _) = noisy_panel(8, 200, 5);
    let a = gauss_matrix(&mut rng(9), 5, 7);
    let shift = DVector::from_fn(5, |i, _| i as f64);
    let mut resp = panel.rows() * a.transpose();
    for mut row in resp.row_iter_mut() {
        row += shift.transpose();
    }
    let est = fof_estimate(&FofData::new(0, resp, panel).unwrap(), &EstimateOptions::default().with_rule(TauRule::FixedK(5))).unwrap();
    assert!((&est.a - &a).amax() < 1e-8);
    assert!((&est.intercept - &shift).amax() < 1e-8);
}

#[test]
fn full_rank_fit_is_dense_least_squares() {
    let (panel, _) = noisy_panel(10, 300, 3);
    let resp = gauss_matrix(&mut rng(11), 300, 3) + panel.rows() * gauss_matrix(&mut rng(12), 5, 3);
    let est = fof_estimate(&FofData::new(0, resp.clone(), panel.clone()).unwrap(), &EstimateOptions::default().with_rule(TauRule::FixedK(3)))
        .unwrap();
    let x = centered(panel.rows());
    for c in 0..3 {
        let coef = dense_ols(&x, &centered(&resp.columns(c, 1).into_owned()).column(0).into_owned());
        assert!((est.a.row(c).transpose() - coef).amax() < 1e-9);
    }
}

fn svar_dgp(j: usize, t: usize, seed: u64) -> (SvarDgp, std::sync::Arc<BasisSpec>) {
    let basis = BasisSpec::fourier(j).unwrap();
    let model = random_structural(&mut rng(seed), &basis, true, j, 0.7);
    (SvarDgp::new(model, t, 200).unwrap(), basis)
}

#[test]
fn function_response_tracks_structural_irf() {
    let (dgp, basis) = svar_dgp(5, 1000, 13);
    let table = sirf(&dgp.reduced, &invert_b(&dgp.model.b).unwrap(), 3).unwrap();
    let zeta = ProductElement::new(DVector::from_vec(vec![1.0, 0.0]), FunctionElement::zeros(basis.clone()));
    let theta = DVector::from_fn(5, |k, _| if k == 0 { 1.0 } else { 0.0 });
    let reps = 300;
    let opts = EstimateOptions::default().with_rule(TauRule::FixedK(5));
    for h in 0..=3 {
        let draws: Vec<f64> = Execution::Parallel.map(reps, |rep| {
            let path = dgp.simulate(&mut rep_rng(14, rep as u64)).unwrap();
            let data = FofData::scalar_shock_design(&path.y, &path.x, basis.clone(), h).unwrap();
            fof_estimate(&data, &opts).unwrap().apply(&zeta).dot(&theta)
        });
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let truth = table.irf21(h).coeffs().dot(&theta);
        let z = (mean - truth) / (sd / (reps as f64).sqrt());
        assert!(z.abs() < 3.0, "h={h}: mean {mean}, truth {truth}, z {z}");
    }
}

fn fitted_fof() -> (funlp::fsvar::FofEstimate, std::sync::Arc<BasisSpec>) {
    let (panel, basis) = noisy_panel(15, 300, 3);
    let mut resp = gauss_matrix(&mut rng(16), 300, 3) + panel.rows() * gauss_matrix(&mut rng(17), 5, 3);
    resp.column_mut(2).fill(4.0);
    (fof_estimate(&FofData::new(0, resp, panel).unwrap(), &EstimateOptions::default()).unwrap(), basis)
}

#[test]
fn orthogonal_response_direction_is_degenerate() {
    let (est, basis) = fitted_fof();
    let theta = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let zeta = ProductElement::new(DVector::from_vec(vec![1.0, 0.0]), FunctionElement::constant(basis, 1.0));
    let lam = hac_longrun(&fof_scores(&est, &theta).unwrap(), &HacSpec::default()).unwrap();
    assert!(matches!(fof_inference(&est, &lam, &zeta, &theta, 0.95), Err(Error::DegenerateVariance { .. })));
}

#[test]
fn point_is_bilinear() {
    let (est, basis) = fitted_fof();
    let point = |zeta: &ProductElement, theta: &DVector<f64>| {
        let lam = hac_longrun(&fof_scores(&est, theta).unwrap(), &HacSpec::default()).unwrap();
        fof_inference(&est, &lam, zeta, theta, 0.95).unwrap().point
    };
    let mut r = rng(18);
    let z1 = ProductElement::from_coords(2, basis.clone(), &gauss_vector(&mut r, 5)).unwrap();
    let z2 = ProductElement::from_coords(2, basis.clone(), &gauss_vector(&mut r, 5)).unwrap();
    let zs = ProductElement::from_coords(2, basis, &(z1.coords() * 2.0 + z2.coords())).unwrap();
    let t1 = DVector::from_vec(vec![1.0, -0.5, 0.0]);
    let t2 = DVector::from_vec(vec![0.3, 0.8, 0.0]);
    assert!((point(&zs, &t1) - 2.0 * point(&z1, &t1) - point(&z2, &t1)).abs() < 1e-12);
    assert!((point(&z1, &(&t1 * 3.0 + &t2)) - 3.0 * point(&z1, &t1) - point(&z1, &t2)).abs() < 1e-12);
}

#[test]
fn function_response_coverage() {
    let (dgp, basis) = svar_dgp(5, 500, 19);
    let table = sirf(&dgp.reduced, &invert_b(&dgp.model.b).unwrap(), 1).unwrap();
    let zeta = ProductElement::new(DVector::from_vec(vec![1.0, 0.0]), FunctionElement::zeros(basis.clone()));
    let theta = DVector::from_fn(5, |k, _| if k == 0 { 1.0 } else { 0.0 });
    let truth = table.irf21(1).coeffs().dot(&theta);
    let opts = EstimateOptions::default().with_rule(TauRule::FixedK(5));
    let reps = 500;
    let hits: Vec<bool> = Execution::Parallel.map(reps, |rep| {
        let path = dgp.simulate(&mut rep_rng(20, rep as u64)).unwrap();
        let data = FofData::scalar_shock_design(&path.y, &path.x, basis.clone(), 1).unwrap();
        let est = fof_estimate(&data, &opts).unwrap();
        let lam = hac_longrun(&fof_scores(&est, &theta).unwrap(), &HacSpec::default()).unwrap();
        fof_inference(&est, &lam, &zeta, &theta, 0.95).unwrap().covers(truth)
    });
    let rate = hits.iter().filter(|&&h| h).count() as f64 / reps as f64;
    assert!((0.88..=0.98).contains(&rate), "coverage {rate}");
}
