//! Sampler selection strings: `gibbs-ars`, `gibbs-conj`, `mwg-imh`, `mwg-imh-mode`,
//! `mwg-rwm`, `mwg-barker`, each optionally followed by `:k=<int>`.

use super::update::{ConditionalUpdate, ProposalSpec, StepSize, BARKER_ETA, RWM_ETA};
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    GibbsArs,
    GibbsConj,
    MwgImh,
    MwgImhMode,
    MwgRwm,
    MwgBarker,
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::GibbsArs => "gibbs-ars",
            SamplerKind::GibbsConj => "gibbs-conj",
            SamplerKind::MwgImh => "mwg-imh",
            SamplerKind::MwgImhMode => "mwg-imh-mode",
            SamplerKind::MwgRwm => "mwg-rwm",
            SamplerKind::MwgBarker => "mwg-barker",
        }
    }

    pub const ALL: [SamplerKind; 6] = [
        SamplerKind::GibbsArs,
        SamplerKind::GibbsConj,
        SamplerKind::MwgImh,
        SamplerKind::MwgImhMode,
        SamplerKind::MwgRwm,
        SamplerKind::MwgBarker,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Inner steps per block visit.
    pub repeat: usize,
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind) -> Self {
        SamplerSpec { kind, repeat: 1 }
    }

    /// The conditional update applied to local blocks.
    pub fn update(&self) -> ConditionalUpdate {
        let base = match self.kind {
            SamplerKind::GibbsArs => ConditionalUpdate::Ars,
            SamplerKind::GibbsConj => ConditionalUpdate::Exact,
            SamplerKind::MwgImh => ConditionalUpdate::Imh(ProposalSpec::FromConditional),
            SamplerKind::MwgImhMode => ConditionalUpdate::ImhAtMode,
            SamplerKind::MwgRwm => ConditionalUpdate::Rwm(StepSize::Scaled { eta: RWM_ETA }),
            SamplerKind::MwgBarker => ConditionalUpdate::Barker(StepSize::Scaled { eta: BARKER_ETA }),
        };
        if self.repeat > 1 {
            ConditionalUpdate::Repeated { k: self.repeat, inner: Box::new(base) }
        } else {
            base
        }
    }
}

impl FromStr for SamplerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, suffix) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let kind = SamplerKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == head)
            .ok_or_else(|| Error::Config(format!("unknown sampler '{head}'")))?;
        let repeat = match suffix {
            None => 1,
            Some(t) => {
                let v = t.strip_prefix("k=").ok_or_else(|| Error::Config(format!("bad sampler suffix '{t}', expected k=<int>")))?;
                let k: usize = v.parse().map_err(|_| Error::Config(format!("bad repeat count '{v}'")))?;
                if k == 0 {
                    return Err(Error::Config("repeat count must be at least 1".into()));
                }
                k
            }
        };
        Ok(SamplerSpec { kind, repeat })
    }
}

impl fmt::Display for SamplerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.repeat > 1 {
            write!(f, "{}:k={}", self.kind.name(), self.repeat)
        } else {
            f.write_str(self.kind.name())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for s in ["gibbs-ars", "gibbs-conj", "mwg-imh", "mwg-imh-mode", "mwg-rwm", "mwg-barker", "mwg-barker:k=100"] {
            let spec: SamplerSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
    }

    #[test]
    fn repeat_suffix_wraps_update() {
        let spec: SamplerSpec = "mwg-rwm:k=7".parse().unwrap();
        match spec.update() {
            ConditionalUpdate::Repeated { k, inner } => {
                assert_eq!(k, 7);
                assert!(matches!(*inner, ConditionalUpdate::Rwm(_)));
            }
            other => panic!("{other:?}"),
        }
        let one: SamplerSpec = "mwg-rwm:k=1".parse().unwrap();
        assert!(matches!(one.update(), ConditionalUpdate::Rwm(_)));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["gibbs", "mwg-barker:k=0", "mwg-barker:n=3", "mwg-barker:k=x", ""] {
            assert!(matches!(s.parse::<SamplerSpec>(), Err(Error::Config(_))), "{s}");
        }
    }
}
