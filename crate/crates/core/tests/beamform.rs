use cran_core::beamform::*;
use cran_core::scenario::{generate_scenario, sample_channel, ChannelRealization, NetworkConfig};
use cran_core::conic::SolverTolerances;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Config sized for hand-built channels: unit noise, one AP per antenna group.
fn small_config(antennas: Vec<usize>, k: usize, gamma: f64) -> NetworkConfig {
    let mut cfg = NetworkConfig::homogeneous(antennas.len(), k);
    cfg.antennas_per_ap = antennas;
    cfg.noise_power = 1.0;
    cfg.qos_dl = vec![gamma; k];
    cfg.qos_ul = vec![gamma; k];
    cfg.ap_tx_limit = vec![1e6; cfg.num_aps];
    cfg.mu_tx_limit = vec![1e6; k];
    cfg
}

fn random_instance(n: usize, k: usize, seed: u64) -> (NetworkConfig, ChannelRealization) {
    let cfg = NetworkConfig::homogeneous(n, k);
    let sc = generate_scenario(&cfg, seed).unwrap();
    let ch = sample_channel(&sc, seed ^ 0x5555);
    (cfg, ch)
}

/// MMSE UL SINR of every MU at powers `p`, straight from the definition
/// `p_i g_i^H (noise I + sum_{j != i} p_j g_j g_j^H)^-1 g_i`.
fn mmse_sinr(ch: &ChannelRealization, p: &[f64], noise: f64) -> Vec<f64> {
    let m = ch.num_antennas();
    (0..ch.num_mus())
        .map(|i| {
            let mut r = DMatrix::<Complex64>::identity(m, m) * c(noise, 0.0);
            for (j, g) in ch.g.iter().enumerate() {
                if j != i {
                    for a in 0..m {
                        for b in 0..m {
                            r[(a, b)] += g[a] * g[b].conj() * p[j];
                        }
                    }
                }
            }
            let gi = nalgebra::DVector::from_vec(ch.g[i].clone());
            let x = r.lu().solve(&gi).unwrap();
            p[i] * gi.dotc(&x).re
        })
        .collect()
}

fn dl_sinr_oracle(ch: &ChannelRealization, w: &[CVec], noise: f64) -> Vec<f64> {
    (0..ch.num_mus())
        .map(|i| {
            let gain = |j: usize| -> f64 {
                ch.h[i].iter().zip(&w[j]).map(|(h, x)| h.conj() * x).sum::<Complex64>().norm_sqr()
            };
            let interference: f64 = (0..w.len()).filter(|&j| j != i).map(gain).sum();
            gain(i) / (interference + noise)
        })
        .collect()
}

fn power(w: &[CVec]) -> f64 {
    w.iter().flatten().map(|x| x.norm_sqr()).sum()
}

#[test]
fn single_link_fixed_point_matches_closed_form() {
    // p = gamma * noise / |g|^2 = 1 * 1 / 2
    let ch = ChannelRealization::reciprocal(vec![1], vec![vec![c(1.0, 1.0)]]).unwrap();
    let out = ul_fixed_point_power(&ch, &[1.0], 1.0, &ActiveSet::all(1), 10.0).unwrap();
    let p = out.converged().expect("single link is feasible").p[0];
    assert!((p - 0.5).abs() < 1e-9, "p = {p}");
}

#[test]
fn two_scalar_users_follow_linear_solution_or_fail() {
    let ch = ChannelRealization::reciprocal(vec![1], vec![vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]]).unwrap();
    // gamma = 0.5: p = gamma (p_other + 1) with unit gains gives p = 1 for both
    let out = ul_fixed_point_power(&ch, &[0.5, 0.5], 1.0, &ActiveSet::all(1), 100.0).unwrap();
    let p = &out.converged().unwrap().p;
    assert!((p[0] - 1.0).abs() < 1e-8 && (p[1] - 1.0).abs() < 1e-8, "{p:?}");

    // gamma = 2: gamma^2 > 1, so no powers work; grid search agrees
    let out = ul_fixed_point_power(&ch, &[2.0, 2.0], 1.0, &ActiveSet::all(1), 100.0).unwrap();
    assert!(out.converged().is_none());
    let mut any = false;
    for a in 0..=200 {
        for b in 0..=200 {
            let p = [a as f64 * 0.5, b as f64 * 0.5];
            let s = mmse_sinr(&ch, &p, 1.0);
            any |= s[0] >= 2.0 && s[1] >= 2.0;
        }
    }
    assert!(!any);
}

#[test]
fn fixed_point_meets_targets_and_is_componentwise_minimal_on_grid() {
    for seed in 0..5 {
        let (cfg, ch) = random_instance(2, 2, seed);
        let budget: f64 = cfg.mu_tx_limit.iter().sum();
        let out = ul_fixed_point_power(&ch, &cfg.qos_ul, cfg.noise_power, &ActiveSet::all(2), budget).unwrap();
        let Some(up) = out.converged() else { continue };
        let s = mmse_sinr(&ch, &up.p, cfg.noise_power);
        for i in 0..2 {
            assert!((s[i] / cfg.qos_ul[i] - 1.0).abs() < 1e-7, "seed {seed}: {s:?}");
        }
        // no grid point strictly below the fixed point in either coordinate is feasible
        for a in 0..60 {
            for b in 0..60 {
                let p = [up.p[0] * 2.0 * a as f64 / 60.0, up.p[1] * 2.0 * b as f64 / 60.0];
                if p[0] < up.p[0] * (1.0 - 1e-6) || p[1] < up.p[1] * (1.0 - 1e-6) {
                    let s = mmse_sinr(&ch, &p, cfg.noise_power);
                    assert!(!(s[0] >= cfg.qos_ul[0] && s[1] >= cfg.qos_ul[1]), "seed {seed} dominated by {p:?}");
                }
            }
        }
    }
}

#[test]
fn virtual_dl_power_equals_ul_sum_power() {
    let mut checked = 0;
    for seed in 0..10 {
        let (cfg, ch) = random_instance(3, 2, seed);
        let all = ActiveSet::all(3);
        let budget: f64 = cfg.mu_tx_limit.iter().sum();
        let Some(up) = ul_fixed_point_power(&ch, &cfg.qos_ul, cfg.noise_power, &all, budget).unwrap().converged().cloned()
        else {
            continue;
        };
        let vdl = virtual_dl_beamforming(&cfg, &ch, &all).unwrap().optimal().unwrap();
        let sum_p: f64 = up.p.iter().sum();
        assert!((vdl.vdl_power() - sum_p).abs() <= 1e-5 * sum_p, "seed {seed}: {} vs {sum_p}", vdl.vdl_power());
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn reciprocal_dl_min_power_equals_ul_min_power() {
    // same targets both ways and g = conj(h): the DL problem is the dual of the UL one
    for seed in 0..5 {
        let (cfg, ch) = random_instance(2, 3, seed);
        let all = ActiveSet::all(2);
        let Some(up) = ul_fixed_point_power(&ch, &cfg.qos_ul, cfg.noise_power, &all, 1e6).unwrap().converged().cloned()
        else {
            continue;
        };
        let dl = min_power_dl_beamforming(&cfg, &ch, &all, false).unwrap().optimal().unwrap();
        let sum_p: f64 = up.p.iter().sum();
        assert!((dl.dl_power() - sum_p).abs() <= 1e-5 * sum_p);
        for (i, s) in dl_sinr_oracle(&ch, &dl.w_dl, cfg.noise_power).iter().enumerate() {
            assert!(*s >= cfg.qos_dl[i] * (1.0 - 1e-6));
        }
    }
}

#[test]
fn single_user_min_power_is_matched_filter() {
    let h = vec![c(0.3, -0.1), c(0.2, 0.4)];
    let nh: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    let ch = ChannelRealization::reciprocal(vec![2], vec![h]).unwrap();
    let cfg = small_config(vec![2], 1, 3.0);
    let dl = min_power_dl_beamforming(&cfg, &ch, &ActiveSet::all(1), false).unwrap().optimal().unwrap();
    let expected = 3.0 / nh;
    assert!((dl.dl_power() - expected).abs() < 1e-6 * expected);
}

#[test]
fn unpenalized_joint_program_splits_into_dl_and_vdl() {
    let (mut cfg, ch) = random_instance(3, 2, 7);
    cfg.weight = 0.7;
    let all = ActiveSet::all(3);
    let tol = SolverTolerances::default();
    let joint = build_p4(&cfg, &ch, &all, &[0.0; 3], Penalty::L12).unwrap().solve(&tol).unwrap().optimal().unwrap();
    let dl = min_power_dl_beamforming(&cfg, &ch, &all, false).unwrap().optimal().unwrap();
    let vdl = virtual_dl_beamforming(&cfg, &ch, &all).unwrap().optimal().unwrap();
    let expected = dl.dl_power() + 0.7 * vdl.vdl_power();
    assert!((joint.objective - expected).abs() < 1e-6 * expected);
}

#[test]
fn large_group_weight_switches_an_ap_off() {
    let (cfg, ch) = random_instance(3, 2, 11);
    let all = ActiveSet::all(3);
    let tol = SolverTolerances::default();
    let base = build_p4(&cfg, &ch, &all, &[0.0; 3], Penalty::L12).unwrap().solve(&tol).unwrap().optimal().unwrap();
    // penalize the AP carrying the least load in the unpenalized solution
    let weakest = (0..3).min_by(|a, b| base.group[*a].total_cmp(&base.group[*b])).unwrap();
    let rest: Vec<usize> = (0..3).filter(|&n| n != weakest).collect();
    if !min_power_dl_beamforming(&cfg, &ch, &ActiveSet::new(rest), false).unwrap().is_optimal() {
        return;
    }
    let mut beta = [0.0; 3];
    beta[weakest] = 1e6;
    let p = build_p4(&cfg, &ch, &all, &beta, Penalty::L12).unwrap().solve(&tol).unwrap().optimal().unwrap();
    let max = p.group.iter().cloned().fold(0.0, f64::max);
    assert!(p.group[weakest] < 1e-4 * max, "{:?}", p.group);
}

#[test]
fn group_epigraph_is_tight() {
    for penalty in [Penalty::L12, Penalty::L1Inf] {
        let ch = ChannelRealization::reciprocal(vec![2], vec![vec![c(0.5, 0.1), c(-0.2, 0.3)]]).unwrap();
        let mut cfg = small_config(vec![2], 1, 2.0);
        cfg.weight = 1.5;
        let tol = SolverTolerances::default();
        let p = build_p4(&cfg, &ch, &ActiveSet::all(1), &[0.8], penalty).unwrap().solve(&tol).unwrap().optimal().unwrap();
        let expected = p.dl_power() + 1.5 * p.vdl_power() + 0.8 * p.group[0];
        assert!((p.objective - expected).abs() < 1e-6, "{penalty:?}: {} vs {expected}", p.objective);
    }
}

#[test]
fn budgets_that_do_not_bind_leave_the_penalized_program_unchanged() {
    let (mut cfg, ch) = random_instance(3, 2, 3);
    cfg.ap_tx_limit = vec![1e6; 3];
    cfg.mu_tx_limit = vec![1e6; 2];
    let all = ActiveSet::all(3);
    let tol = SolverTolerances::default();
    let beta = [0.3, 1.0, 2.0];
    let p4 = build_p4(&cfg, &ch, &all, &beta, Penalty::L12).unwrap().solve(&tol).unwrap().optimal().unwrap();
    let p5 = build_p5(&cfg, &ch, &all, &beta, Penalty::L12).unwrap().solve(&tol).unwrap().optimal().unwrap();
    assert!((p4.objective - p5.objective).abs() < 1e-6 * p4.objective);

    // a DL budget far below the single-AP requirement makes the program infeasible
    let dl = min_power_dl_beamforming(&cfg, &ch, &all, false).unwrap().optimal().unwrap();
    cfg.ap_tx_limit = vec![dl.dl_power() * 1e-3; 3];
    let out = build_p5(&cfg, &ch, &all, &beta, Penalty::L12).unwrap().solve(&tol).unwrap();
    assert_eq!(out, ProgramOutcome::Infeasible);
}

#[test]
fn on_off_program_bounds() {
    let (cfg, ch) = (0..)
        .map(|seed| random_instance(3, 2, seed))
        .find(|(cfg, ch)| check_joint_feasibility(ch, cfg, &ActiveSet::all(3)).unwrap().feasible())
        .unwrap();
    let tol = SolverTolerances::default();
    let all_on = build_p6(&cfg, &ch, &[RhoSetting::On; 3]).unwrap().solve(&tol).unwrap().optimal().unwrap();
    let statics: f64 = cfg.ap_static_power.iter().sum();
    let spec = JointSpec {
        dl: true,
        vdl: true,
        vdl_weight: cfg.weight,
        group: None,
        per_ap_dl_limit: true,
        ul_sum_limit: true,
        rho: None,
    };
    let plain = build_joint(&cfg, &ch, &ActiveSet::all(3), &spec).unwrap().solve(&tol).unwrap().optimal().unwrap();
    assert!((all_on.objective - (statics + plain.objective)).abs() < 1e-6 * all_on.objective);

    // relaxing every pattern's free indicators never costs more than fixing them on
    for mask in 1u64..8 {
        let on: Vec<RhoSetting> = (0..3).map(|n| if mask >> n & 1 == 1 { RhoSetting::On } else { RhoSetting::Off }).collect();
        let free: Vec<RhoSetting> = on.iter().map(|s| if *s == RhoSetting::On { RhoSetting::Free } else { RhoSetting::Off }).collect();
        let binary = build_p6(&cfg, &ch, &on).unwrap().solve(&tol).unwrap();
        let relaxed = build_p6(&cfg, &ch, &free).unwrap().solve(&tol).unwrap();
        if let ProgramOutcome::Optimal(b) = binary {
            let r = relaxed.optimal().expect("relaxation of a feasible pattern is feasible");
            assert!(r.objective <= b.objective * (1.0 + 1e-7), "mask {mask}");
            assert!(r.rho.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}

#[test]
fn feasibility_report_flags_ul_budget_violations() {
    let (mut cfg, ch) = random_instance(3, 2, 2);
    let all = ActiveSet::all(3);
    let ok = check_joint_feasibility(&ch, &cfg, &all).unwrap();
    if !ok.feasible() {
        return;
    }
    let p = ok.ul_power.as_ref().unwrap().p.clone();
    cfg.mu_tx_limit = vec![p[0] * 0.5, p[1] * 2.0];
    let bad = check_joint_feasibility(&ch, &cfg, &all).unwrap();
    assert!(bad.dl_feasible && !bad.ul_feasible);
    assert_eq!(bad.ul_violators, vec![0]);
}

#[test]
fn conjugated_virtual_dl_beamformers_serve_the_ul() {
    for seed in 0..5 {
        let (cfg, ch) = random_instance(3, 3, seed);
        let all = ActiveSet::all(3);
        let Some(vdl) = virtual_dl_beamforming(&cfg, &ch, &all).unwrap().optimal() else { continue };
        let v: Vec<CVec> = vdl.w_vdl.iter().map(|w| w.iter().map(|x| x.conj()).collect()).collect();
        let p = ul_power_for_filters(&ch, &v, &cfg.qos_ul, cfg.noise_power).unwrap();
        let s = ul_sinr(&ch, &v, &p, cfg.noise_power);
        for i in 0..3 {
            assert!(s[i] >= cfg.qos_ul[i] * (1.0 - 1e-9));
        }
        // these filters are MMSE-optimal, so the powers are the fixed point
        let up = ul_fixed_point_power(&ch, &cfg.qos_ul, cfg.noise_power, &all, 1e6).unwrap();
        let q = &up.converged().unwrap().p;
        for i in 0..3 {
            assert!((p[i] - q[i]).abs() <= 1e-5 * q[i], "seed {seed}: {p:?} vs {q:?}");
        }
    }
}

#[test]
fn weighted_total_power_counts_only_active_aps() {
    let (cfg, ch) = random_instance(3, 2, 1);
    let active = ActiveSet::new(vec![0, 2]);
    let Some(dl) = min_power_dl_beamforming(&cfg, &ch, &active, false).unwrap().optimal() else { return };
    let mut sol = BeamformingSolution::zeros(&cfg.antennas_per_ap, 2);
    sol.w_dl = dl.w_dl.clone();
    sol.p_ul = vec![0.1, 0.2];
    let o = weighted_total_power(&sol, &active, &cfg).unwrap();
    let expected = cfg.ap_static_power[0] + cfg.ap_static_power[2] + power(&dl.w_dl) + cfg.weight * 0.3;
    assert!((o.total - expected).abs() < 1e-12);
    assert!(weighted_total_power(&sol, &ActiveSet::new(vec![0]), &cfg).is_err());
}
