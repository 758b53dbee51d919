//! Random-scan composition P = Σ w_i P_i.

use super::update::UpdateOutcome;
use crate::error::{Error, Result};
use rand::{Rng, RngCore};

/// One block of a random-scan kernel acting on chain state `S`.
pub trait BlockUpdate<S>: Send + Sync {
    fn label(&self) -> String;
    fn update(&self, state: &mut S, rng: &mut dyn RngCore) -> Result<UpdateOutcome>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepTelemetry {
    pub block: usize,
    pub outcome: UpdateOutcome,
}

impl StepTelemetry {
    /// True when the selected block moved at least once.
    pub fn moved(&self) -> bool {
        self.outcome.accepted > 0
    }
}

pub struct RandomScanKernel<S> {
    blocks: Vec<Box<dyn BlockUpdate<S>>>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl<S> RandomScanKernel<S> {
    /// Uniform weights.
    pub fn uniform(blocks: Vec<Box<dyn BlockUpdate<S>>>) -> Result<Self> {
        let n = blocks.len();
        if n == 0 {
            return Err(Error::Config("a random-scan kernel needs at least one block".into()));
        }
        Self::new(blocks, vec![1.0 / n as f64; n])
    }

    /// Weights must be non-negative and sum to one. Zero weights are allowed and
    /// make the block unreachable.
    pub fn new(blocks: Vec<Box<dyn BlockUpdate<S>>>, weights: Vec<f64>) -> Result<Self> {
        if blocks.is_empty() || blocks.len() != weights.len() {
            return Err(Error::Config(format!("{} blocks but {} weights", blocks.len(), weights.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config(format!("selection weights must be non-negative: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("selection weights sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        // guard the last positive-weight block against rounding in the running sum
        if let Some(last) = weights.iter().rposition(|w| *w > 0.0) {
            cdf[last..].iter_mut().for_each(|c| *c = f64::INFINITY);
        }
        Ok(RandomScanKernel { blocks, weights, cdf })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.blocks.iter().map(|b| b.label()).collect()
    }

    /// Inverse-CDF block choice from a single uniform.
    pub fn select(&self, u: f64) -> usize {
        let mut i = self.cdf.partition_point(|&c| c <= u);
        while self.weights[i] == 0.0 {
            i += 1;
        }
        i
    }

    pub fn step(&self, state: &mut S, rng: &mut dyn RngCore) -> Result<StepTelemetry> {
        let block = self.select(rng.random::<f64>());
        let outcome = self.blocks[block].update(state, rng).map_err(|e| e.in_block(block))?;
        Ok(StepTelemetry { block, outcome })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    struct Bump(usize);

    impl BlockUpdate<Vec<u32>> for Bump {
        fn label(&self) -> String {
            format!("bump{}", self.0)
        }
        fn update(&self, s: &mut Vec<u32>, _rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
            s[self.0] += 1;
            Ok(UpdateOutcome { proposals: 1, accepted: 1, evals: 0 })
        }
    }

    struct Fails;

    impl BlockUpdate<Vec<u32>> for Fails {
        fn label(&self) -> String {
            "fails".into()
        }
        fn update(&self, _s: &mut Vec<u32>, _rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
            Err(Error::Domain("bad state".into()))
        }
    }

    fn bumps(n: usize) -> Vec<Box<dyn BlockUpdate<Vec<u32>>>> {
        (0..n).map(|i| Box::new(Bump(i)) as Box<dyn BlockUpdate<Vec<u32>>>).collect()
    }

    #[test]
    fn degenerate_weights_touch_one_block() {
        let k = RandomScanKernel::new(bumps(3), vec![1.0, 0.0, 0.0]).unwrap();
        let mut s = vec![0; 3];
        let mut rng = crate::rng::Stream::seed_from_u64(1);
        for _ in 0..10_000 {
            assert_eq!(k.step(&mut s, &mut rng).unwrap().block, 0);
        }
        assert_eq!(s, vec![10_000, 0, 0]);
    }

    #[test]
    fn selection_frequencies_follow_weights() {
        let w = vec![0.5, 0.2, 0.3];
        let k = RandomScanKernel::new(bumps(3), w.clone()).unwrap();
        let mut s = vec![0; 3];
        let mut rng = crate::rng::Stream::seed_from_u64(2);
        let n = 100_000;
        for _ in 0..n {
            k.step(&mut s, &mut rng).unwrap();
        }
        for i in 0..3 {
            let p = s[i] as f64 / n as f64;
            let se = (w[i] * (1.0 - w[i]) / n as f64).sqrt();
            assert!((p - w[i]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn zero_weight_blocks_are_skipped_at_boundaries() {
        let k = RandomScanKernel::new(bumps(4), vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        assert_eq!(k.select(0.0), 1);
        assert_eq!(k.select(0.5), 3);
        assert_eq!(k.select(1.0 - 1e-17), 3);
    }

    #[test]
    fn errors_carry_block_index() {
        let mut blocks = bumps(1);
        blocks.push(Box::new(Fails));
        let k = RandomScanKernel::new(blocks, vec![0.0, 1.0]).unwrap();
        let mut rng = crate::rng::Stream::seed_from_u64(3);
        let err = k.step(&mut vec![0], &mut rng).unwrap_err();
        assert!(matches!(err, Error::Block { block: 1, .. }));
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(RandomScanKernel::new(bumps(2), vec![0.7, 0.7]).is_err());
        assert!(RandomScanKernel::new(bumps(2), vec![1.5, -0.5]).is_err());
        assert!(RandomScanKernel::new(bumps(2), vec![1.0]).is_err());
    }
}
