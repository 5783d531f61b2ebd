use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

use vaxstab::dynamics::rhs_covid_demographic;
use vaxstab::ingest::fixtures::{ny_contact, ny_demographic_params};
use vaxstab::model::{
    build_demographic_coupling, build_flow_matrix, check_decay_certificate, effective_reproduction_number,
    project_contact_matrix, CovidInstance, DiseaseParams, EpidemicState, NetworkInstance,
};

fn network(n: usize) -> impl Strategy<Value = NetworkInstance> {
    (
        prop::collection::vec(0.0..1.0f64, n * n),
        prop::collection::vec(0.05..0.95f64, n),
        prop::collection::vec(1e2..1e6f64, n),
    )
        .prop_map(move |(w, rows, pop)| {
            let mut tau = DMatrix::from_row_slice(n, n, &w);
            for i in 0..n {
                tau[(i, i)] += 1.0;
                let sum: f64 = tau.row(i).sum();
                for j in 0..n {
                    tau[(i, j)] *= rows[i] / sum;
                }
            }
            NetworkInstance::new(tau, pop.iter().map(|p| p.round()).collect())
        })
}

fn any_network() -> impl Strategy<Value = NetworkInstance> {
    (1usize..7).prop_flat_map(network)
}

fn sym_max(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.max()
}

fn reference_rates() -> DiseaseParams {
    DiseaseParams::homogeneous(0.5, 1.0, 0.0469, 0.153, 0.1436, 0.0165, 0.95)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_gram_matrix_is_psd(net in any_network()) {
        let f = build_flow_matrix(&net).unwrap();
        prop_assert!(f.a_bar.clone().symmetric_eigen().eigenvalues.min() >= -1e-10);
        prop_assert!((&f.a_bar - f.a_bar.transpose()).amax() <= 1e-15 * f.a_bar.amax().max(1e-300));
    }

    #[test]
    fn kronecker_top_eigenvalue_factorizes(net in any_network(), b in prop::collection::vec(0.0..1.0f64, 9)) {
        let b = DMatrix::from_row_slice(3, 3, &b);
        let gamma = &b * b.transpose();
        let a_bar = build_flow_matrix(&net).unwrap().a_bar;
        let k = a_bar.kronecker(&gamma);
        let want = sym_max(&a_bar) * sym_max(&gamma);
        prop_assert!((sym_max(&k) - want).abs() <= 1e-9 * want.abs().max(1e-300));
    }

    #[test]
    fn demographic_coupling_matches_entrywise_formula(
        n in 1usize..4,
        seed in prop::collection::vec(0.0..1.0f64, 64),
    ) {
        let g = 2;
        let tau = DMatrix::from_fn(n, n, |i, j| if i == j { 0.4 } else { 0.1 * seed[i * n + j] });
        let gp = DMatrix::from_fn(n, g, |i, a| 100.0 + 1000.0 * seed[20 + i * g + a]);
        let gamma = DMatrix::from_fn(g, g, |a, b| 0.5 + seed[40 + a * g + b]);
        let net = NetworkInstance::with_groups(tau.clone(), gp.clone());
        let k = build_demographic_coupling(&net, &gamma).unwrap();
        let totals: Vec<f64> = (0..n).map(|i| gp.row(i).sum()).collect();
        let m: Vec<f64> = (0..n).map(|l| (0..n).map(|q| totals[q] * tau[(q, l)]).sum()).collect();
        for i in 0..n {
            for a in 0..g {
                for j in 0..n {
                    for b in 0..g {
                        let abar: f64 = (0..n).map(|l| tau[(i, l)] * tau[(j, l)] / m[l]).sum();
                        let want = abar * gamma[(a, b)] * gp[(j, b)];
                        let got = k[(i * g + a, j * g + b)];
                        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn contact_projection_round_trips(
        c in prop::collection::vec(0.1..5.0f64, 16),
        p in prop::collection::vec(1e3..1e6f64, 4),
        q in prop::collection::vec(1e3..1e6f64, 4),
    ) {
        let c = DMatrix::from_row_slice(4, 4, &c);
        let there = project_contact_matrix(&c, &p, &q).unwrap();
        let back = project_contact_matrix(&there, &q, &p).unwrap();
        prop_assert!((&back - &c).amax() <= 1e-12 * c.amax());
    }
}

/// Three formulations of "stable at zero decay rate" agree away from the boundary.
#[test]
fn stability_formulations_agree_at_zero_rate() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strat = (any_network(), prop::collection::vec(0.3..1.0f64, 6), 0.05..2.5f64);
    let (mut checked, mut stable) = (0, 0);
    for _ in 0..400 {
        if checked == 100 {
            break;
        }
        let (net, s, beta) = strat.new_tree(&mut runner).unwrap().current();
        let n = net.len();
        let inst = CovidInstance {
            network: net,
            params: reference_rates().scaled_transmission(beta),
            contact: None,
            state: EpidemicState::susceptible(s[..n].to_vec()),
        };
        let rt = effective_reproduction_number(&inst).unwrap();
        let cert = check_decay_certificate(&inst, &vec![0.0; n], 0.0).unwrap();
        if (rt - 1.0).abs() < 1e-6 || (cert.discrete_radius - 1.0).abs() < 1e-6 || cert.lambda_max.abs() < 1e-6 {
            continue;
        }
        let answers = [rt <= 1.0, cert.discrete_radius <= 1.0, cert.lambda_max <= 0.0];
        assert!(answers.iter().all(|&x| x == answers[0]), "Rt {rt}, cert {cert:?}");
        stable += answers[0] as usize;
        checked += 1;
    }
    assert_eq!(checked, 100);
    assert!(stable > 5 && stable < 95, "draws should straddle the threshold, got {stable} stable");
}

/// Age-structured right-hand side against an explicit sum over (location, group) pairs.
#[test]
fn demographic_rhs_matches_loop_oracle() {
    let gp = DMatrix::from_row_slice(2, 6, &[1e5, 3e5, 2e5, 3e5, 4e5, 2e5, 5e4, 1e5, 1e5, 2e5, 1e5, 8e4]);
    let tau = DMatrix::from_row_slice(2, 2, &[0.45, 0.05, 0.1, 0.3]);
    let net = NetworkInstance::with_groups(tau.clone(), gp.clone());
    let params = ny_demographic_params(0.02, 0.5);
    let cs = ny_contact().unwrap();
    let cells = 12;
    let mut st = EpidemicState::susceptible(vec![0.9; cells]);
    for c in 0..cells {
        st.xa[c] = 0.002 + 0.0003 * c as f64;
        st.xs[c] = 0.001;
        st.h[c] = 1.0 - st.s[c] - st.xa[c] - st.xs[c];
    }
    let d = rhs_covid_demographic(&st, &net, &params, &cs).unwrap();

    let rates = params.cell_rates(2, 6).unwrap();
    let totals: Vec<f64> = (0..2).map(|i| gp.row(i).sum()).collect();
    let m: Vec<f64> = (0..2).map(|l| (0..2).map(|q| totals[q] * tau[(q, l)]).sum()).collect();
    for i in 0..2 {
        for a in 0..6 {
            let c = i * 6 + a;
            let mut force = 0.0;
            for j in 0..2 {
                for b in 0..6 {
                    let abar: f64 = (0..2).map(|l| tau[(i, l)] * tau[(j, l)] / m[l]).sum();
                    let kk = abar * cs.gamma[(a, b)] * gp[(j, b)];
                    force += kk * (rates.beta_a[c] * st.xa[j * 6 + b] + rates.beta_s[c] * st.xs[j * 6 + b]);
                }
            }
            let inflow = st.s[c] * force;
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1e-9);
            assert!(close(d.s[c], -inflow));
            assert!(close(d.xa[c], inflow - (rates.epsilon + rates.r_a) * st.xa[c]));
            assert!(close(d.xs[c], rates.epsilon * st.xa[c] - (rates.r_s[c] + rates.kappa[c]) * st.xs[c]));
            assert!(close(d.e[c], rates.kappa[c] * st.xs[c]));
            assert!(close(d.h[c], rates.r_a * st.xa[c] + rates.r_s[c] * st.xs[c]));
        }
    }
}
