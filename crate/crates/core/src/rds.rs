//! Recursive distribution search.
//!
//! With an exactly evaluable CDF, the position of `q` inside a subarray
//! bounded by two observed keys is predicted by the conditional CDF. The
//! empirical CDF of the keys in between concentrates around it, so a window
//! of radius `sqrt(0.5 k ln ln k)` around the prediction holds the answer
//! with high probability. The search verifies the window edges, recurses
//! into it, and falls back to binary search when a check fails. No index is
//! stored.

use std::sync::Arc;

use crate::bench::max_of_means;
use crate::distributions::CdfModel;
use crate::error::{Error, Result};
use crate::instrument::OpContext;
use crate::keys::{search_window, Rank, SortedKeyArray};
use crate::RankIndex;

/// Subarrays with fewer than this many interior keys are binary searched.
pub const BASE_CASE: usize = 25;

/// `(F(q) - F(a_i)) / (F(a_j) - F(a_i))` clamped to `[0, 1]`.
///
/// The three evaluations make up one conditional-CDF evaluation and are
/// charged as a single CDF operation.
pub fn conditional_cdf(
    base: &CdfModel,
    a_i: f64,
    a_j: f64,
    q: f64,
    ctx: &mut OpContext,
) -> Result<f64> {
    if !(a_i < a_j) {
        return Err(Error::DegenerateInterval { a_i, a_j });
    }
    ctx.cdf_eval();
    let (f_i, f_j) = (base.cdf(a_i), base.cdf(a_j));
    if !(f_j > f_i) {
        return Err(Error::DegenerateInterval { a_i, a_j });
    }
    Ok(((base.cdf(q) - f_i) / (f_j - f_i)).clamp(0.0, 1.0))
}

/// Predicted window `[l, u]` for the subarray `[i, j]` given the
/// conditional CDF value `f` of the query, clipped to `[i, j]`.
pub fn rds_window(i: usize, j: usize, f: f64) -> (usize, usize) {
    let k = (j - i - 1) as f64;
    let center = (i + 1) as f64 + k * f;
    let radius = (0.5 * k * k.ln().ln()).sqrt();
    let l = ((center - radius).floor().max(i as f64)) as usize;
    let u = ((center + radius).ceil().min(j as f64)) as usize;
    (l, u)
}

/// Exact rank of `q` in `a`, searching with `base` as the key distribution.
///
/// The answer is exact for any model; a model that does not match the data
/// only makes the window checks fail more often.
pub fn rds_search(a: &SortedKeyArray, q: f64, base: &CdfModel, ctx: &mut OpContext) -> Rank {
    let keys = a.keys();
    let n = keys.len();
    if n == 0 {
        return Rank(0);
    }
    // Invariant: the answer lies in [i - 1, j]. Once both edge keys have
    // been read, a_i <= q < a_j and the answer lies in [i, j - 1].
    let (mut i, mut j) = (1, n);
    let mut edges: Option<(f64, f64)> = None;
    let mut depth = 0;
    loop {
        ctx.enter(depth);
        if j - i < BASE_CASE + 1 {
            return Rank(match edges {
                Some(_) => i + search_window(keys, q, i + 1, j - 1, ctx),
                None => i - 1 + search_window(keys, q, i, j, ctx),
            });
        }
        let (a_i, a_j) = match edges {
            Some(e) => e,
            None => {
                let a_i = ctx.read(keys, i);
                if a_i > q {
                    return Rank(i - 1);
                }
                let a_j = ctx.read(keys, j);
                if a_j <= q {
                    return Rank(j);
                }
                (a_i, a_j)
            }
        };
        let fallback = |ctx: &mut OpContext| Rank(i + search_window(keys, q, i + 1, j - 1, ctx));
        let Ok(f) = conditional_cdf(base, a_i, a_j, q, ctx) else {
            return fallback(ctx);
        };
        let (l, u) = rds_window(i, j, f);
        let a_l = if l == i { a_i } else { ctx.read(keys, l) };
        if a_l > q {
            return fallback(ctx);
        }
        let a_u = if u == j { a_j } else { ctx.read(keys, u) };
        if a_u <= q {
            return fallback(ctx);
        }
        (i, j) = (l, u);
        edges = Some((a_l, a_u));
        depth += 1;
    }
}

/// Search-only "index": the array plus the distribution model.
#[derive(Debug, Clone)]
pub struct RdsIndex {
    array: Arc<SortedKeyArray>,
    model: CdfModel,
}

impl RdsIndex {
    pub fn new(array: Arc<SortedKeyArray>, model: CdfModel) -> Self {
        RdsIndex { array, model }
    }

    pub fn model(&self) -> &CdfModel {
        &self.model
    }
}

impl RankIndex for RdsIndex {
    fn rank(&self, q: f64, ctx: &mut OpContext) -> Rank {
        rds_search(&self.array, q, &self.model, ctx)
    }

    /// Only the model's parameters, which are not counted as index storage.
    fn size_ints(&self) -> u64 {
        0
    }

    fn len(&self) -> usize {
        self.array.len()
    }
}

/// Max over queries of the mean over arrays of the search's memory
/// operations.
pub fn rds_expected_ops(arrays: &[SortedKeyArray], queries: &[f64], base: &CdfModel) -> f64 {
    let ops: Vec<Vec<u64>> = queries
        .iter()
        .map(|&q| {
            arrays
                .iter()
                .map(|a| {
                    let mut ctx = OpContext::new();
                    rds_search(a, q, base, &mut ctx);
                    ctx.mem_ops
                })
                .collect()
        })
        .collect();
    max_of_means(&ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_sorted;
    use crate::instrument::TraceEvent;
    use crate::keys::rank_oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conditional_cdf_examples() {
        let mut ctx = OpContext::new();
        let u = CdfModel::uniform();
        assert!((conditional_cdf(&u, 0.2, 0.8, 0.5, &mut ctx).unwrap() - 0.5).abs() < 1e-12);
        let p2 = CdfModel::power(2.0).unwrap();
        assert!((conditional_cdf(&p2, 0.0, 1.0, 0.5, &mut ctx).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(ctx.cdf_evals, 2);
        assert!(matches!(
            conditional_cdf(&u, 0.4, 0.4, 0.4, &mut ctx),
            Err(Error::DegenerateInterval { .. })
        ));
        assert_eq!(conditional_cdf(&u, 0.2, 0.8, 0.9, &mut ctx).unwrap(), 1.0);
        assert_eq!(conditional_cdf(&u, 0.2, 0.8, 0.0, &mut ctx).unwrap(), 0.0);
        // flat region of the model: zero mass between the keys
        let p = CdfModel::trunc_gaussian(0.5, 0.01).unwrap();
        assert!(conditional_cdf(&p, 0.0, 1e-3, 1e-4, &mut ctx).is_err());
    }

    #[test]
    fn window_for_a_hundred_interior_keys() {
        // k = 100: center 2 + 50 = 52, radius sqrt(50 ln ln 100) = 8.738
        assert_eq!(rds_window(1, 102, 0.5), (43, 61));
        assert_eq!(rds_window(1, 102, 0.0), (1, 11));
        assert_eq!(rds_window(1, 102, 1.0), (93, 102));
    }

    #[test]
    fn small_arrays_take_the_base_case() {
        let a = sample_sorted(&CdfModel::uniform(), 10, 3);
        for q in [-1.0, 0.1, 0.5, 0.9, 2.0] {
            let mut ctx = OpContext::traced();
            assert_eq!(rds_search(&a, q, &CdfModel::uniform(), &mut ctx), rank_oracle(&a, q));
            assert!(ctx.mem_ops <= 4 + 2);
            assert_eq!(ctx.cdf_evals, 0);
            assert_eq!(ctx.max_depth(), Some(0));
        }
    }

    #[test]
    fn out_of_range_queries() {
        let a = sample_sorted(&CdfModel::uniform(), 1000, 4);
        let m = CdfModel::uniform();
        let mut ctx = OpContext::new();
        assert_eq!(rds_search(&a, a.keys()[0] - 1e-9, &m, &mut ctx), Rank(0));
        assert_eq!(rds_search(&a, a.keys()[999], &m, &mut ctx), Rank(1000));
        assert_eq!(rds_search(&a, 5.0, &m, &mut ctx), Rank(1000));
        let empty = SortedKeyArray::unit(vec![]).unwrap();
        assert_eq!(rds_search(&empty, 0.5, &m, &mut ctx), Rank(0));
    }

    #[test]
    fn matches_oracle_on_matching_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let models = [
            CdfModel::uniform(),
            CdfModel::power(4.0).unwrap(),
            CdfModel::trunc_gaussian(0.5, 0.1).unwrap(),
        ];
        for (s, m) in models.iter().enumerate() {
            for seed in 0..10 {
                let a = sample_sorted(m, 10_000, 100 * s as u64 + seed);
                for _ in 0..300 {
                    let q = if rng.random_bool(0.2) {
                        a.keys()[rng.random_range(0..a.len())]
                    } else {
                        rng.random_range(-0.1..1.1)
                    };
                    let mut ctx = OpContext::new();
                    assert_eq!(rds_search(&a, q, m, &mut ctx), rank_oracle(&a, q));
                }
            }
        }
    }

    /// Smallest d with n^((3/4)^d) <= 25.
    fn depth_bound(n: usize) -> usize {
        let mut d = 0;
        while (n as f64).powf(0.75f64.powi(d as i32)) > BASE_CASE as f64 {
            d += 1;
        }
        d
    }

    #[test]
    fn depth_and_cdf_evaluations_stay_log_logarithmic() {
        let n = 1 << 20;
        let a = sample_sorted(&CdfModel::uniform(), n, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let cap = (n as f64).log2().log2().ceil() as u64 + 3;
        for _ in 0..1000 {
            let q: f64 = rng.random();
            let mut ctx = OpContext::traced();
            assert_eq!(rds_search(&a, q, &CdfModel::uniform(), &mut ctx), rank_oracle(&a, q));
            let depth = ctx.max_depth().unwrap();
            assert!(depth <= depth_bound(n), "depth {depth}");
            assert!(ctx.cdf_evals <= depth as u64 + 1);
            assert!(ctx.cdf_evals <= cap);
        }
    }

    #[test]
    fn trace_accounts_for_every_operation() {
        let a = sample_sorted(&CdfModel::uniform(), 50_000, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let q: f64 = rng.random();
            let mut ctx = OpContext::traced();
            rds_search(&a, q, &CdfModel::power(4.0).unwrap(), &mut ctx);
            let trace = ctx.trace().unwrap();
            let reads = trace.iter().filter(|e| matches!(e, TraceEvent::Read(_))).count() as u64;
            let cdfs = trace.iter().filter(|e| matches!(e, TraceEvent::Cdf)).count() as u64;
            assert_eq!(reads + cdfs, ctx.mem_ops);
            assert_eq!(cdfs, ctx.cdf_evals);
        }
    }

    #[test]
    fn expected_ops_beat_binary_search() {
        let arrays: Vec<_> = (0..20).map(|s| sample_sorted(&CdfModel::uniform(), 1 << 16, s)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let queries: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let metric = rds_expected_ops(&arrays, &queries, &CdfModel::uniform());
        assert!(metric >= 1.0 && metric < 17.0, "{metric}");
        let same = vec![arrays[0].clone(); 3];
        let single = rds_expected_ops(&arrays[..1], &queries, &CdfModel::uniform());
        assert_eq!(rds_expected_ops(&same, &queries, &CdfModel::uniform()), single);
    }

    fn any_model() -> impl Strategy<Value = CdfModel> {
        prop_oneof![
            Just(CdfModel::uniform()),
            (0.3f64..20.0).prop_map(|t| CdfModel::power(t).unwrap()),
            (0.0f64..1.0, 0.005f64..0.5).prop_map(|(m, s)| CdfModel::trunc_gaussian(m, s).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn exact_under_mismatched_models(
            data in any_model(),
            model in any_model(),
            n in 0usize..3000,
            seed in any::<u64>(),
            queries in prop::collection::vec(-0.1f64..1.1, 20),
        ) {
            let a = sample_sorted(&data, n, seed);
            for q in queries {
                prop_assert_eq!(rds_search(&a, q, &model, &mut OpContext::new()), rank_oracle(&a, q));
            }
        }

        #[test]
        fn exact_with_heavy_ties(
            grid in 2usize..12,
            raw in prop::collection::vec(0usize..12, 0..400),
            model in any_model(),
        ) {
            let mut keys: Vec<f64> = raw.iter().map(|&g| (g % grid) as f64 / grid as f64).collect();
            keys.sort_by(f64::total_cmp);
            let a = SortedKeyArray::unit(keys).unwrap();
            for g in 0..=2 * grid {
                let q = g as f64 / (2 * grid) as f64;
                prop_assert_eq!(rds_search(&a, q, &model, &mut OpContext::new()), rank_oracle(&a, q));
            }
        }
    }
}
