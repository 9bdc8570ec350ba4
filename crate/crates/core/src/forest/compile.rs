//! Compilation of polynomial-denoiser AMP into forests.

use std::collections::HashMap;

use super::lumber::Forest;
use crate::amp::{DenoiserFamily, MultiPoly};
use crate::error::{Error, Result};

/// Default cap on forest size during compilation.
pub const DEFAULT_TERM_CAP: usize = 200_000;

/// Substitute forests for the variables of a polynomial.
fn substitute(poly: &MultiPoly, vars: &[Forest], cap: usize) -> Result<Forest> {
    let mut powers: HashMap<(usize, u32), Forest> = HashMap::new();
    let mut out = Forest::zero();
    for m in &poly.terms {
        let mut term = Forest::constant(m.coef);
        for (v, &e) in m.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !powers.contains_key(&(v, e)) {
                let mut p = Forest::constant(1.0);
                for _ in 0..e {
                    p = p.hadamard(&vars[v]);
                    check_cap(&p, cap)?;
                }
                powers.insert((v, e), p);
            }
            term = term.hadamard(&powers[&(v, e)]);
            check_cap(&term, cap)?;
        }
        out = out.add(&term);
        check_cap(&out, cap)?;
    }
    Ok(out)
}

fn check_cap(f: &Forest, cap: usize) -> Result<()> {
    if f.len() > cap {
        Err(Error::Resource(format!("forest exceeded {cap} terms during compilation")))
    } else {
        Ok(())
    }
}

/// Forests for `x^0, …, x^t` under a polynomial family.
///
/// Onsager coefficients are compiled symbolically: `∂f^s/∂x^j` is a
/// polynomial in the iterates, its substitution is a forest, and the trunk of
/// that forest is `b_{s,j}`.
pub fn compile_amp_iterates(fam: &DenoiserFamily, t: usize, cap: usize) -> Result<Vec<Forest>> {
    fam.validate(t)?;
    let mut polys = Vec::with_capacity(t);
    for s in 0..t {
        let d = fam.step(s)?;
        polys.push(d.symbolic(s).ok_or_else(|| {
            Error::Unsupported(format!("step {s} denoiser {:?} is not polynomial", d.kind))
        })?);
    }
    let mut xs = vec![Forest::constant(1.0)];
    let mut fs: Vec<Forest> = Vec::with_capacity(t);
    for (s, p) in polys.iter().enumerate() {
        let f = substitute(p, &xs, cap)?;
        let mut next = f.mul_x();
        for j in 1..=s {
            let b = substitute(&p.partial(j), &xs, cap)?.trunk();
            next = next.add(&b.hadamard(&fs[j - 1]).scale(-1.0));
            check_cap(&next, cap)?;
        }
        fs.push(f);
        xs.push(next);
    }
    Ok(xs)
}

/// Forest `P` with `P(X) = x^t` for every `X`.
pub fn compile_amp_forest(fam: &DenoiserFamily, t: usize) -> Result<Forest> {
    Ok(compile_amp_iterates(fam, t, DEFAULT_TERM_CAP)?.pop().expect("x^0 present"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amp::Denoiser;
    use crate::forest::lumber::Lumber;
    use crate::forest::tree::RootedTree;

    #[test]
    fn identity_one_step() {
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 1.0]), 1);
        let f = compile_amp_forest(&fam, 1).unwrap();
        assert_eq!(f, Forest::single(Lumber::tree(RootedTree::leaf().rerooted()), 1.0));
    }

    #[test]
    fn square_two_steps() {
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 0.0, 1.0]), 2);
        let f = compile_amp_forest(&fam, 2).unwrap();
        let t1 = RootedTree::leaf().rerooted();
        let t2 = t1.grafted(&t1).rerooted();
        let expect = Forest::single(Lumber::tree(t2), 1.0)
            .add(&Forest::single(Lumber::new(RootedTree::leaf(), vec![t1]).unwrap(), -2.0));
        assert_eq!(f, expect);
    }

    #[test]
    fn relu_is_unsupported() {
        let fam = DenoiserFamily::uniform(Denoiser::relu(), 1);
        assert!(matches!(compile_amp_forest(&fam, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn term_cap_is_enforced() {
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[1.0, 1.0, 1.0]), 4);
        assert!(matches!(compile_amp_iterates(&fam, 4, 10), Err(Error::Resource(_))));
    }
}
