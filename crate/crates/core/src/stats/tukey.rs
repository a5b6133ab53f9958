//! One-way ANOVA and Tukey-Kramer honestly significant differences.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::StatsError;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn pnorm(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that the range of `cc` standard normals is below `w`, raised to `rr`.
fn wprob(w: f64, rr: f64, cc: f64) -> f64 {
    const NLEG: usize = 12;
    const IHALF: usize = 6;
    const C1: f64 = -30.0;
    const C2: f64 = -50.0;
    const C3: f64 = 60.0;
    const BB: f64 = 8.0;
    const WLAR: f64 = 3.0;
    const XLEG: [f64; IHALF] = [
        0.981_560_634_246_719_3,
        0.904_117_256_370_474_9,
        0.769_902_674_194_304_7,
        0.587_317_954_286_617_4,
        0.367_831_498_998_180_2,
        0.125_233_408_511_468_9,
    ];
    const ALEG: [f64; IHALF] = [
        0.047_175_336_386_511_83,
        0.106_939_325_995_318_4,
        0.160_078_328_543_346_2,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_8,
        0.249_147_045_813_402_8,
    ];

    let qsqz = w * 0.5;
    if qsqz >= BB {
        return 1.0;
    }
    let mut pr_w = 2.0 * pnorm(qsqz) - 1.0;
    pr_w = if pr_w >= (C2 / cc).exp() { pr_w.powf(cc) } else { 0.0 };

    let wincr = if w > WLAR { 2 } else { 3 };
    let mut blb = qsqz;
    let binc = (BB - qsqz) / wincr as f64;
    let mut bub = blb + binc;
    let mut einsum = 0.0;
    let cc1 = cc - 1.0;
    for _ in 0..wincr {
        let mut elsum = 0.0;
        let a = 0.5 * (bub + blb);
        let b = 0.5 * (bub - blb);
        for jj in 1..=NLEG {
            let (j, xx) = if IHALF < jj {
                let j = NLEG - jj + 1;
                (j, XLEG[j - 1])
            } else {
                (jj, -XLEG[jj - 1])
            };
            let ac = a + b * xx;
            let qexpo = ac * ac;
            if qexpo > C3 {
                break;
            }
            let rinsum = pnorm(ac) - pnorm(ac - w);
            if rinsum >= (C1 / cc1).exp() {
                elsum += ALEG[j - 1] * (-0.5 * qexpo).exp() * rinsum.powf(cc1);
            }
        }
        einsum += elsum * (2.0 * b * cc / SQRT_2PI);
        blb = bub;
        bub += binc;
    }
    pr_w += einsum;
    if pr_w <= (C1 / rr).exp() {
        return 0.0;
    }
    pr_w.powf(rr).min(1.0)
}

/// Lower-tail CDF of the studentized range for `k` groups and `df` degrees of freedom.
pub fn ptukey(q: f64, k: f64, df: f64) -> f64 {
    const NLEGQ: usize = 16;
    const IHALFQ: usize = 8;
    const EPS1: f64 = -30.0;
    const EPS2: f64 = 1.0e-14;
    const XLEGQ: [f64; IHALFQ] = [
        0.989_400_934_991_649_9,
        0.944_575_023_073_232_6,
        0.865_631_202_387_831_7,
        0.755_404_408_355_003,
        0.617_876_244_402_643_7,
        0.458_016_777_657_227_4,
        0.281_603_550_779_258_9,
        0.095_012_509_837_637_44,
    ];
    const ALEGQ: [f64; IHALFQ] = [
        0.027_152_459_411_754_09,
        0.062_253_523_938_647_89,
        0.095_158_511_682_492_78,
        0.124_628_971_255_533_9,
        0.149_595_988_816_576_7,
        0.169_156_519_395_002_5,
        0.182_603_415_044_923_6,
        0.189_450_610_455_068_5,
    ];

    if q.is_nan() || k < 2.0 || df < 2.0 {
        return f64::NAN;
    }
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df > 25_000.0 {
        return wprob(q, 1.0, k);
    }

    let f2 = df * 0.5;
    let mut f2lf = f2 * df.ln() - df * std::f64::consts::LN_2 - ln_gamma(f2);
    let f21 = f2 - 1.0;
    let ff4 = df * 0.25;
    let ulen: f64 = if df <= 100.0 {
        1.0
    } else if df <= 800.0 {
        0.5
    } else if df <= 5000.0 {
        0.25
    } else {
        0.125
    };
    f2lf += ulen.ln();

    let mut ans = 0.0;
    for i in 1..=50 {
        let mut otsum = 0.0;
        let twa1 = (2 * i - 1) as f64 * ulen;
        for jj in 1..=NLEGQ {
            let (j, upper) = if IHALFQ < jj {
                (jj - IHALFQ - 1, true)
            } else {
                (jj - 1, false)
            };
            let off = XLEGQ[j] * ulen;
            let t1 = if upper {
                f2lf + f21 * (twa1 + off).ln() - (off + twa1) * ff4
            } else {
                f2lf + f21 * (twa1 - off).ln() + (off - twa1) * ff4
            };
            if t1 >= EPS1 {
                let qsqz = if upper {
                    q * ((off + twa1) * 0.5).sqrt()
                } else {
                    q * ((twa1 - off) * 0.5).sqrt()
                };
                otsum += wprob(qsqz, 1.0, k) * ALEGQ[j] * t1.exp();
            }
        }
        if i as f64 * ulen >= 1.0 && otsum <= EPS2 {
            break;
        }
        ans += otsum;
    }
    ans.min(1.0)
}

/// Quantile of the studentized range, by bracketing and bisection on [`ptukey`].
pub fn qtukey(p: f64, k: f64, df: f64) -> f64 {
    if !(0.0..1.0).contains(&p) || k < 2.0 || df < 2.0 {
        return f64::NAN;
    }
    if p == 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ptukey(hi, k, df) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ptukey(mid, k, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    /// `None` when the within-group variance is zero.
    pub f_statistic: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group1: String,
    pub group2: String,
    /// `mean(group2) - mean(group1)`.
    pub meandiff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_adj: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub alpha: f64,
    pub q_crit: f64,
    pub mse: f64,
    pub anova: Anova,
    pub pairs: Vec<TukeyPair>,
}

impl TukeyResult {
    pub fn pair(&self, a: &str, b: &str) -> Option<&TukeyPair> {
        self.pairs
            .iter()
            .find(|p| (p.group1 == a && p.group2 == b) || (p.group1 == b && p.group2 == a))
    }
}

fn check_groups(groups: &[(String, Vec<f64>)]) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::InsufficientData("at least two groups required".into()));
    }
    for (name, v) in groups {
        if v.len() < 2 {
            return Err(StatsError::InsufficientData(format!(
                "group {name} has fewer than two observations"
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::InvalidArgument(format!(
                "group {name} has non-finite values"
            )));
        }
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn one_way_anova(groups: &[(String, Vec<f64>)]) -> Result<Anova, StatsError> {
    check_groups(groups)?;
    let n: usize = groups.iter().map(|g| g.1.len()).sum();
    let grand = groups.iter().flat_map(|g| g.1.iter()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for (_, v) in groups {
        let m = mean(v);
        ss_between += v.len() as f64 * (m - grand).powi(2);
        ss_within += v.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let msw = ss_within / df_within as f64;
    let msb = ss_between / df_between as f64;
    let (f_statistic, p_value) = if msw > 0.0 {
        let f = msb / msw;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .map_err(|e| StatsError::InvalidArgument(e.to_string()))?;
        (Some(f), dist.sf(f))
    } else if msb > 0.0 {
        (None, 0.0)
    } else {
        (None, 1.0)
    };
    Ok(Anova {
        df_between,
        df_within,
        ss_between,
        ss_within,
        f_statistic,
        p_value,
    })
}

/// All-pairs comparison over `groups` in listed order, with unequal group sizes allowed.
pub fn tukey_hsd(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<TukeyResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let anova = one_way_anova(groups)?;
    let k = groups.len() as f64;
    let df = anova.df_within as f64;
    let mse = anova.ss_within / df;
    let q_crit = qtukey(1.0 - alpha, k, df);
    let means: Vec<f64> = groups.iter().map(|g| mean(&g.1)).collect();
    let mut pairs = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let meandiff = means[j] - means[i];
            let se = (mse / 2.0 * (1.0 / groups[i].1.len() as f64 + 1.0 / groups[j].1.len() as f64)).sqrt();
            let (ci_low, ci_high, p_adj) = if se > 0.0 {
                let p = (1.0 - ptukey(meandiff.abs() / se, k, df)).clamp(0.0, 1.0);
                (meandiff - q_crit * se, meandiff + q_crit * se, p)
            } else if meandiff != 0.0 {
                (meandiff, meandiff, 0.0)
            } else {
                (0.0, 0.0, 1.0)
            };
            pairs.push(TukeyPair {
                group1: groups[i].0.clone(),
                group2: groups[j].0.clone(),
                meandiff,
                ci_low,
                ci_high,
                p_adj,
                reject: p_adj < alpha,
            });
        }
    }
    Ok(TukeyResult {
        alpha,
        q_crit,
        mse,
        anova,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn groups(v: &[(&str, &[f64])]) -> Vec<(String, Vec<f64>)> {
        v.iter().map(|(n, x)| (n.to_string(), x.to_vec())).collect()
    }

    // Reference values from an independent studentized-range implementation.
    const QUANTILES: [(f64, f64, f64, f64); 10] = [
        (2.0, 5.0, 3.63535169514679, 0.08735930812736137),
        (3.0, 10.0, 3.876776750013158, 0.13498341518956258),
        (3.0, 27.0, 3.506426123354149, 0.1043024227611844),
        (4.0, 20.0, 3.9582935609453846, 0.18047345146910743),
        (5.0, 30.0, 4.102079019506422, 0.237673613513516),
        (3.0, 60.0, 3.3986612406682806, 0.09403640153910653),
        (6.0, 12.0, 4.750231446710962, 0.33863186279798874),
        (10.0, 40.0, 4.73451288382765, 0.5241630042371245),
        (2.0, 120.0, 2.800044431422315, 0.03595231986497727),
        (8.0, 15.0, 4.939889597217345, 0.444556568911196),
    ];

    #[test]
    fn quantiles_match_reference() {
        for &(k, df, q95, sf3) in &QUANTILES {
            assert!((qtukey(0.95, k, df) - q95).abs() < 1e-6, "q k={k} df={df}");
            assert!((1.0 - ptukey(3.0, k, df) - sf3).abs() < 1e-7, "sf k={k} df={df}");
        }
    }

    #[test]
    fn two_group_range_is_scaled_t() {
        // For k = 2 the studentized range is sqrt(2) |t|.
        let t = statrs::distribution::StudentsT::new(0.0, 1.0, 9.0).unwrap();
        for q in [0.5, 1.5, 3.0, 5.0] {
            let expected = 2.0 * t.cdf(q / std::f64::consts::SQRT_2) - 1.0;
            assert!((ptukey(q, 2.0, 9.0) - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn matches_reference_tukey_kramer() {
        let g = groups(&[
            ("A", &[0.70, 0.68, 0.71, 0.66, 0.69]),
            ("B", &[0.75, 0.77, 0.73, 0.74]),
            ("C", &[0.86, 0.85, 0.88, 0.84, 0.87, 0.86]),
        ]);
        let r = tukey_hsd(&g, 0.05).unwrap();
        let expected = [
            (0.0595, 0.02957559, 0.08942441, 5.06721199e-04),
            (0.172, 0.14498811, 0.19901189, 2.61625210e-09),
            (0.1125, 0.08370523, 0.14129477, 6.38707490e-07),
        ];
        for (p, e) in r.pairs.iter().zip(expected) {
            assert!((p.meandiff - e.0).abs() < 1e-12);
            assert!((p.ci_low - e.1).abs() < 1e-7);
            assert!((p.ci_high - e.2).abs() < 1e-7);
            assert!((p.p_adj - e.3).abs() < 1e-7);
            assert!(p.reject);
        }
        assert!((r.anova.f_statistic.unwrap() - 150.47093889716916).abs() < 1e-9);
        assert!((r.anova.p_value - 3.179108652609799e-09).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_do_not_reject() {
        let g = groups(&[("x", &[1.0, 2.0, 3.0]), ("y", &[1.0, 2.0, 3.0])]);
        let r = tukey_hsd(&g, 0.05).unwrap();
        assert_eq!(r.pairs[0].meandiff, 0.0);
        assert!(!r.pairs[0].reject);
        let flat = groups(&[("x", &[1.0, 1.0]), ("y", &[1.0, 1.0]), ("z", &[1.0, 1.0])]);
        let r = tukey_hsd(&flat, 0.05).unwrap();
        assert!(r.pairs.iter().all(|p| !p.reject && p.p_adj == 1.0));
    }

    #[test]
    fn zero_variance_unequal_means_rejects() {
        let g = groups(&[("x", &[1.0, 1.0]), ("y", &[2.0, 2.0])]);
        let r = tukey_hsd(&g, 0.05).unwrap();
        assert!(r.pairs[0].reject);
        assert_eq!(r.pairs[0].p_adj, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(tukey_hsd(&groups(&[("x", &[1.0, 2.0])]), 0.05).is_err());
        assert!(tukey_hsd(&groups(&[("x", &[1.0]), ("y", &[1.0, 2.0])]), 0.05).is_err());
        assert!(tukey_hsd(&groups(&[("x", &[1.0, 2.0]), ("y", &[1.0, 2.0])]), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn order_invariance_and_ci_consistency(
            a in proptest::collection::vec(0.0f64..1.0, 2..8),
            b in proptest::collection::vec(0.0f64..1.0, 2..8),
            c in proptest::collection::vec(0.0f64..1.0, 2..8),
        ) {
            let g = vec![("a".to_string(), a.clone()), ("b".to_string(), b.clone()), ("c".to_string(), c.clone())];
            let rev = vec![("c".to_string(), c), ("b".to_string(), b), ("a".to_string(), a)];
            let r1 = tukey_hsd(&g, 0.05).unwrap();
            let r2 = tukey_hsd(&rev, 0.05).unwrap();
            for p in &r1.pairs {
                let q = r2.pair(&p.group1, &p.group2).unwrap();
                prop_assert!((p.p_adj - q.p_adj).abs() < 1e-12);
                prop_assert!((p.meandiff + q.meandiff).abs() < 1e-12);
                prop_assert!(p.ci_low <= p.meandiff && p.meandiff <= p.ci_high);
                let excludes_zero = p.ci_low > 0.0 || p.ci_high < 0.0;
                // Boundary cases agree up to quadrature accuracy.
                if (p.p_adj - 0.05).abs() > 1e-6 {
                    prop_assert_eq!(p.reject, excludes_zero);
                }
            }
        }
    }
}
