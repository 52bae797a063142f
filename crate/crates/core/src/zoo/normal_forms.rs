use serde::{Deserialize, Serialize};

use crate::diff::{Dual, SmoothMap};
use crate::error::{Error, Result};

/// Standard local models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalForm {
    /// `(x_1, .., x_n) -> (x_1, .., x_{n-1}, x_n^2)`
    Fold { n: usize },
    /// `(x_1, .., x_n) -> (x_1^2, x_1 x_2, .., x_1 x_n, x_2, .., x_n)` into `R^{2n-1}`
    WhitneyUmbrella { n: usize },
    /// `x -> (x, 0, .., 0)` into `R^l`
    Inclusion { n: usize, l: usize },
    /// Same model as the fold, the name used for `D_p` on `R^m`.
    DefiniteFold { m: usize },
}

impl NormalForm {
    pub fn from_name(name: &str, n: usize, l: Option<usize>) -> Result<Self> {
        match name {
            "fold" => Ok(NormalForm::Fold { n }),
            "whitney_umbrella" => Ok(NormalForm::WhitneyUmbrella { n }),
            "inclusion" => Ok(NormalForm::Inclusion {
                n,
                l: l.ok_or_else(|| Error::BadDimension("inclusion needs a target dimension".into()))?,
            }),
            "definite_fold" => Ok(NormalForm::DefiniteFold { m: n }),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }

    pub fn domain_dim(&self) -> usize {
        match *self {
            NormalForm::Fold { n }
            | NormalForm::WhitneyUmbrella { n }
            | NormalForm::Inclusion { n, .. } => n,
            NormalForm::DefiniteFold { m } => m,
        }
    }
}

pub fn normal_form(kind: NormalForm) -> Result<SmoothMap> {
    match kind {
        NormalForm::Fold { n } | NormalForm::DefiniteFold { m: n } => {
            let label = if matches!(kind, NormalForm::Fold { .. }) {
                format!("fold({n})")
            } else {
                format!("definite_fold({n})")
            };
            SmoothMap::new(label, n, n, move |x: &[Dual]| {
                let mut out = x.to_vec();
                out[n - 1] = x[n - 1].square();
                out
            })
        }
        NormalForm::WhitneyUmbrella { n } => {
            if n < 2 {
                return Err(Error::BadDimension(format!(
                    "whitney umbrella needs n >= 2, got {n}"
                )));
            }
            SmoothMap::new(format!("whitney_umbrella({n})"), n, 2 * n - 1, move |x: &[Dual]| {
                let mut out = Vec::with_capacity(2 * n - 1);
                out.push(x[0].square());
                for xi in &x[1..] {
                    out.push(&x[0] * xi);
                }
                out.extend(x[1..].iter().cloned());
                out
            })
        }
        NormalForm::Inclusion { n, l } => {
            if l < n {
                return Err(Error::BadDimension(format!("inclusion R^{n} -> R^{l}")));
            }
            SmoothMap::new(format!("inclusion({n},{l})"), n, l, move |x: &[Dual]| {
                let mut out = x.to_vec();
                out.resize(l, Dual::constant(0.0));
                out
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, RANK_TOL};

    #[test]
    fn umbrella_at_origin() {
        let w = normal_form(NormalForm::WhitneyUmbrella { n: 2 }).unwrap();
        assert_eq!(w.evaluate(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(numerical_rank(&w.jacobian(&[0.0, 0.0]).unwrap(), RANK_TOL), 1);
    }

    #[test]
    fn umbrella_in_higher_dimension() {
        let w = normal_form(NormalForm::WhitneyUmbrella { n: 3 }).unwrap();
        assert_eq!(w.codomain_dim(), 5);
        assert_eq!(w.evaluate(&[2.0, 3.0, 5.0]).unwrap(), vec![4.0, 6.0, 10.0, 3.0, 5.0]);
    }

    #[test]
    fn fold_and_inclusion() {
        let f = normal_form(NormalForm::Fold { n: 1 }).unwrap();
        assert_eq!(f.jacobian(&[0.0]).unwrap()[(0, 0)], 0.0);
        let i = normal_form(NormalForm::Inclusion { n: 1, l: 3 }).unwrap();
        assert_eq!(i.evaluate(&[5.0]).unwrap(), vec![5.0, 0.0, 0.0]);
        let d = normal_form(NormalForm::DefiniteFold { m: 2 }).unwrap();
        assert_eq!(d.evaluate(&[3.0, -2.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn unknown_and_bad_kinds() {
        assert!(matches!(NormalForm::from_name("cusp", 2, None), Err(Error::UnknownKind(_))));
        assert!(normal_form(NormalForm::WhitneyUmbrella { n: 1 }).is_err());
        assert!(normal_form(NormalForm::Inclusion { n: 3, l: 2 }).is_err());
    }
}
