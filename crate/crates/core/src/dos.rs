//! Degree-of-sharing (DoS) classification strings.
//!
//! A classification for a model with `L` levels of grouping has `L + 1`
//! semicolon-separated parts. The first part lists how mixture components are
//! shared at each level (`L` hyphen-separated letters from `F`, `G`, `C`).
//! Part `l + 1` describes the mixture distributions at level `l`: `L - l`
//! share letters, then the dimensionality (`N`, `P` or `NP`) and an optional
//! `S` marking sequential structure. An unclustered part is the bare letter `N`.
//!
//! ```
//! use hiseg_core::dos::{parse_dos, format_dos, lookup_known_model};
//! let c = parse_dos("c-f; g-np; n").unwrap();
//! assert_eq!(format_dos(&c), "C-F;G-NP;N");
//! assert_eq!(lookup_known_model(&c), Some("HDP"));
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::generative::{GenerativeConfig, GenerativeMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShareMode {
    Full,
    GroupSpecific,
    ClusterSpecific,
}

impl ShareMode {
    pub fn letter(self) -> &'static str {
        match self {
            ShareMode::Full => "F",
            ShareMode::GroupSpecific => "G",
            ShareMode::ClusterSpecific => "C",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimensionality {
    NotClustered,
    Parametric,
    Nonparametric,
}

impl Dimensionality {
    pub fn letters(self) -> &'static str {
        match self {
            Dimensionality::NotClustered => "N",
            Dimensionality::Parametric => "P",
            Dimensionality::Nonparametric => "NP",
        }
    }
}

/// Sharing, dimensionality and sequence flag of the distributions at one level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThetaSpec {
    pub share_modes: Vec<ShareMode>,
    pub dimensionality: Dimensionality,
    pub sequential: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DosClassification {
    pub levels: usize,
    pub phi_modes: Vec<ShareMode>,
    pub theta_specs: Vec<ThetaSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DosError {
    /// Unknown letter, misplaced token or empty part.
    Syntax { part: usize, message: String },
    /// Part count or share-letter count inconsistent with the level count.
    Arity {
        part: usize,
        expected: usize,
        found: usize,
    },
    /// `S` where it is not allowed.
    Flag { part: usize, message: String },
    /// Valid classification without an executable generative configuration.
    Unsupported { feature: String },
}

impl DosError {
    /// Stable class name used in machine-readable output.
    pub fn class(&self) -> &'static str {
        match self {
            DosError::Syntax { .. } => "SyntaxError",
            DosError::Arity { .. } => "ArityError",
            DosError::Flag { .. } => "FlagError",
            DosError::Unsupported { .. } => "UnsupportedError",
        }
    }
}

impl fmt::Display for DosError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DosError::Syntax { part, message } => {
                write!(f, "syntax error in part {part}: {message}")
            }
            DosError::Arity {
                part,
                expected,
                found,
            } => {
                if *part == 0 {
                    write!(f, "expected {expected} parts, found {found}")
                } else {
                    write!(
                        f,
                        "part {part}: expected {expected} share letters, found {found}"
                    )
                }
            }
            DosError::Flag { part, message } => write!(f, "flag error in part {part}: {message}"),
            DosError::Unsupported { feature } => write!(f, "unsupported: {feature}"),
        }
    }
}

impl core::error::Error for DosError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Token {
    Share(ShareMode),
    Dim(Dimensionality),
    Seq,
}

fn token(raw: &str, part: usize) -> Result<Token, DosError> {
    let t = raw.trim().to_ascii_uppercase();
    Ok(match t.as_str() {
        "F" => Token::Share(ShareMode::Full),
        "G" => Token::Share(ShareMode::GroupSpecific),
        "C" => Token::Share(ShareMode::ClusterSpecific),
        "N" => Token::Dim(Dimensionality::NotClustered),
        "P" => Token::Dim(Dimensionality::Parametric),
        "NP" => Token::Dim(Dimensionality::Nonparametric),
        "S" => Token::Seq,
        _ => {
            return Err(DosError::Syntax {
                part,
                message: alloc::format!("unknown letter {:?}", raw.trim()),
            });
        }
    })
}

fn tokens(part_text: &str, part: usize) -> Result<Vec<Token>, DosError> {
    let toks: Vec<Token> = part_text
        .split('-')
        .filter(|s| !s.trim().is_empty())
        .map(|s| token(s, part))
        .collect::<Result<_, _>>()?;
    if toks.is_empty() {
        return Err(DosError::Syntax {
            part,
            message: "empty part".to_string(),
        });
    }
    Ok(toks)
}

pub fn parse_dos(text: &str) -> Result<DosClassification, DosError> {
    if !text.is_ascii() {
        return Err(DosError::Syntax {
            part: 0,
            message: "non-ASCII input".to_string(),
        });
    }
    let text = text.trim();
    if text.is_empty() {
        return Err(DosError::Syntax {
            part: 0,
            message: "empty input".to_string(),
        });
    }
    let parts: Vec<&str> = text.split(';').collect();

    // part 1: component sharing, share letters only
    let mut phi_modes = Vec::new();
    for t in tokens(parts[0], 1)? {
        match t {
            Token::Share(m) => phi_modes.push(m),
            Token::Dim(_) => {
                return Err(DosError::Syntax {
                    part: 1,
                    message: "dimensionality not allowed in component part".to_string(),
                })
            }
            Token::Seq => {
                return Err(DosError::Flag {
                    part: 1,
                    message: "S not allowed in component part".to_string(),
                })
            }
        }
    }
    let levels = phi_modes.len();
    if parts.len() != levels + 1 {
        return Err(DosError::Arity {
            part: 0,
            expected: levels + 1,
            found: parts.len(),
        });
    }

    let mut theta_specs = Vec::with_capacity(levels);
    for (idx, raw) in parts.iter().enumerate().skip(1) {
        let part = idx + 1;
        let level = idx;
        let expected_shares = levels - level;
        let toks = tokens(raw, part)?;
        let mut share_modes = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            if let Token::Share(m) = toks[i] {
                share_modes.push(m);
                i += 1;
            } else {
                break;
            }
        }
        let dimensionality = match toks.get(i) {
            Some(Token::Dim(d)) => *d,
            Some(Token::Seq) => {
                return Err(DosError::Syntax {
                    part,
                    message: "S must follow the dimensionality".to_string(),
                })
            }
            _ => {
                return Err(DosError::Syntax {
                    part,
                    message: "missing dimensionality (N, P or NP)".to_string(),
                })
            }
        };
        i += 1;
        let mut sequential = false;
        for t in &toks[i..] {
            match t {
                Token::Seq if sequential => {
                    return Err(DosError::Flag {
                        part,
                        message: "repeated S".to_string(),
                    })
                }
                Token::Seq => sequential = true,
                Token::Share(_) => {
                    return Err(DosError::Syntax {
                        part,
                        message: "share letter after dimensionality".to_string(),
                    })
                }
                Token::Dim(_) => {
                    return Err(DosError::Syntax {
                        part,
                        message: "repeated dimensionality".to_string(),
                    })
                }
            }
        }
        if dimensionality == Dimensionality::NotClustered {
            if sequential {
                return Err(DosError::Flag {
                    part,
                    message: "S on an unclustered (N) part".to_string(),
                });
            }
            if !share_modes.is_empty() {
                return Err(DosError::Arity {
                    part,
                    expected: 0,
                    found: share_modes.len(),
                });
            }
        } else if levels == 1 {
            // a single-level mixture distribution is written with its implicit full sharing
            match share_modes.as_slice() {
                [ShareMode::Full] => share_modes.clear(),
                [_] => {
                    return Err(DosError::Syntax {
                        part,
                        message: "single-level mixture distribution must be F".to_string(),
                    })
                }
                other => {
                    return Err(DosError::Arity {
                        part,
                        expected: 1,
                        found: other.len(),
                    })
                }
            }
        } else if share_modes.len() != expected_shares {
            return Err(DosError::Arity {
                part,
                expected: expected_shares,
                found: share_modes.len(),
            });
        }
        theta_specs.push(ThetaSpec {
            share_modes,
            dimensionality,
            sequential,
        });
    }
    Ok(DosClassification {
        levels,
        phi_modes,
        theta_specs,
    })
}

pub fn format_dos(c: &DosClassification) -> String {
    let mut out = String::new();
    let phi: Vec<&str> = c.phi_modes.iter().map(|m| m.letter()).collect();
    out.push_str(&phi.join("-"));
    for spec in &c.theta_specs {
        out.push(';');
        let mut toks: Vec<&str> = spec.share_modes.iter().map(|m| m.letter()).collect();
        if c.levels == 1 && spec.dimensionality != Dimensionality::NotClustered {
            toks.insert(0, ShareMode::Full.letter());
        }
        toks.push(spec.dimensionality.letters());
        if spec.sequential {
            toks.push("S");
        }
        out.push_str(&toks.join("-"));
    }
    out
}

impl fmt::Display for DosClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_dos(self))
    }
}

impl FromStr for DosClassification {
    type Err = DosError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_dos(s)
    }
}

/// The classifications of the models discussed in the taxonomy, canonical form.
pub const KNOWN_MODELS: [(&str, &str); 11] = [
    ("GMM", "C;F-P"),
    ("DP-MM", "C;F-NP"),
    ("HDP-HMM", "C;F-NP-S"),
    ("LDA", "C-F;G-P;N"),
    ("HDP", "C-F;G-NP;N"),
    ("NDP", "C-C;C-NP;NP"),
    ("MLC-HDP", "C-F-F;C-F-NP;C-NP;NP"),
    ("TSM", "C-F-F;C-G-P;G-NP-S;N"),
    ("STM", "C-F-F;F-G-NP;N;N"),
    ("LaDP", "C-F-F;C-F-NP-S;F-NP-S;N"),
    ("NewsTranscript", "C-C-F;C-F-NP-S;G-P-S;N"),
];

pub fn lookup_known_model(c: &DosClassification) -> Option<&'static str> {
    let key = format_dos(c);
    KNOWN_MODELS
        .iter()
        .find(|(_, s)| *s == key)
        .map(|(name, _)| *name)
}

/// Map a classification onto an executable forward-sampler configuration.
pub fn to_generative_config(c: &DosClassification) -> Result<GenerativeConfig, DosError> {
    let key = format_dos(c);
    let mode = match key.as_str() {
        "C;F-NP" => GenerativeMode::Dpmm,
        "C;F-NP-S" => GenerativeMode::StickyHmm,
        "C-F;G-P;N" => GenerativeMode::FiniteLda,
        "C-C;C-NP;NP" => GenerativeMode::NdpMask,
        "C-C-F;C-F-NP-S;G-P-S;N" => GenerativeMode::NewsTranscript,
        _ => {
            let feature = match lookup_known_model(c) {
                Some("GMM") => {
                    "GMM needs Gaussian emissions; only multinomial emissions are supported"
                        .to_string()
                }
                Some(name) => alloc::format!("no forward sampler for {name} ({key})"),
                None => alloc::format!("no forward sampler for classification {key}"),
            };
            return Err(DosError::Unsupported { feature });
        }
    };
    Ok(GenerativeConfig::for_mode(mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmm_has_one_level() {
        let c = parse_dos("C;F-P").unwrap();
        assert_eq!(c.levels, 1);
        assert_eq!(c.phi_modes, [ShareMode::ClusterSpecific]);
        assert_eq!(
            c.theta_specs,
            [ThetaSpec {
                share_modes: Vec::new(),
                dimensionality: Dimensionality::Parametric,
                sequential: false
            }]
        );
    }

    #[test]
    fn hdp_structure() {
        let c = parse_dos("C-F;G-NP;N").unwrap();
        assert_eq!(c.levels, 2);
        assert_eq!(c.phi_modes, [ShareMode::ClusterSpecific, ShareMode::Full]);
        assert_eq!(c.theta_specs[0].share_modes, [ShareMode::GroupSpecific]);
        assert_eq!(
            c.theta_specs[0].dimensionality,
            Dimensionality::Nonparametric
        );
        assert!(!c.theta_specs[0].sequential);
        assert_eq!(
            c.theta_specs[1].dimensionality,
            Dimensionality::NotClustered
        );
        assert!(c.theta_specs[1].share_modes.is_empty());
    }

    #[test]
    fn mlc_hdp_three_levels() {
        let c = parse_dos("C-F-F;C-F-NP;C-NP;NP").unwrap();
        assert_eq!(c.levels, 3);
        assert_eq!(c.theta_specs[0].share_modes.len(), 2);
        assert_eq!(c.theta_specs[1].share_modes.len(), 1);
        assert_eq!(c.theta_specs[2].share_modes.len(), 0);
        assert_eq!(
            c.theta_specs[2].dimensionality,
            Dimensionality::Nonparametric
        );
    }

    #[test]
    fn missing_part_is_arity_error() {
        assert_eq!(
            parse_dos("C-F;G").unwrap_err(),
            DosError::Arity {
                part: 0,
                expected: 3,
                found: 2
            }
        );
    }

    #[test]
    fn error_classes() {
        assert_eq!(parse_dos("C-X;G-NP;N").unwrap_err().class(), "SyntaxError");
        assert_eq!(parse_dos("C-F;G-F-NP;N").unwrap_err().class(), "ArityError");
        assert_eq!(parse_dos("C-F;G-NP;N-S").unwrap_err().class(), "FlagError");
        assert_eq!(parse_dos("C-S;F-NP").unwrap_err().class(), "FlagError");
        assert_eq!(parse_dos("C;F-NP-S-S").unwrap_err().class(), "FlagError");
        assert_eq!(parse_dos("").unwrap_err().class(), "SyntaxError");
        assert_eq!(parse_dos("C;F-NP-é").unwrap_err().class(), "SyntaxError");
    }

    #[test]
    fn lowercase_and_whitespace_canonicalize() {
        let c = parse_dos("  c-c-f ; c-f-np-s ; g-p-s ; n ").unwrap();
        assert_eq!(format_dos(&c), "C-C-F;C-F-NP-S;G-P-S;N");
        assert_eq!(format_dos(&parse_dos("C--F;G-NP;N").unwrap()), "C-F;G-NP;N");
    }

    #[test]
    fn formats_known_structures() {
        for (_, s) in KNOWN_MODELS {
            assert_eq!(format_dos(&parse_dos(s).unwrap()), s);
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(
            lookup_known_model(&parse_dos("C-C;C-NP;NP").unwrap()),
            Some("NDP")
        );
        assert_eq!(
            lookup_known_model(&parse_dos("C-F-F;F-G-NP;N;N").unwrap()),
            Some("STM")
        );
        assert_eq!(lookup_known_model(&parse_dos("C-F;G-P;P").unwrap()), None);
    }

    #[test]
    fn generative_configs() {
        let dpmm = to_generative_config(&parse_dos("C;F-NP").unwrap()).unwrap();
        assert_eq!(dpmm.mode, GenerativeMode::Dpmm);
        let sticky = to_generative_config(&parse_dos("C;F-NP-S").unwrap()).unwrap();
        assert_eq!(sticky.mode, GenerativeMode::StickyHmm);
        let err = to_generative_config(&parse_dos("C-F-F;F-G-NP;N;N").unwrap()).unwrap_err();
        assert_eq!(err.class(), "UnsupportedError");
        assert!(err.to_string().contains("STM"));
    }
}
