//! Orthonormal harmonic bases from fundamental point sets.
//!
//! For degree l on S^{d-1} (d >= 3), pick h_l points whose zonal Gram matrix
//! G_ij = Z_l(x_i, x_j) is well conditioned. Since G is the Gram matrix of
//! the functions Z_l(., x_i) in L^2 of the uniform measure (reproducing
//! property), the Cholesky factor L of G turns evaluations into an
//! orthonormal basis: Y(x) = L^{-1} (Z_l(x, x_i))_i. Points are chosen by
//! greedy determinant maximization over random candidate pools; almost every
//! point set works, the greedy step only protects the conditioning.
//!
//! On the circle the basis is the explicit Fourier pair sqrt(2) cos(l phi),
//! sqrt(2) sin(l phi).

use crate::error::{Error, Result};
use crate::geom::{uniform_unit, UnitVector};
use crate::harmonics::{harmonic_dim, zonal_kernel_t};
use crate::numeric::linalg::GrowingCholesky;
use crate::rng::{phase, Seed};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

/// Candidate pool size per greedy step, as a multiple of h_l.
const POOL_FACTOR: usize = 20;
/// Relative pivot tolerance: pivots below this times the leading pivot fail.
const PIVOT_TOL: f64 = 1e-8;
/// Fresh candidate pools tried per point before giving up.
const MAX_POOLS: usize = 64;
/// Guard rail for desk-scale use.
const MAX_H: usize = 4096;

/// h_l points with an invertible zonal Gram matrix, plus its Cholesky factor.
#[derive(Debug, Clone)]
pub struct FundamentalSet {
    degree: usize,
    dim: usize,
    points: Vec<UnitVector>,
    factor: Vec<Vec<f64>>,
}

impl FundamentalSet {
    /// Greedy construction from random pools.
    pub fn build(d: usize, degree: usize, seed: Seed) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidDimension(d));
        }
        assert!(degree >= 1, "fundamental sets start at degree 1");
        let h = harmonic_dim(d, degree);
        if h > MAX_H {
            return Err(Error::BasisConstruction {
                degree,
                reason: format!("h_l = {h} exceeds the configured maximum {MAX_H}"),
            });
        }
        let mut rng = seed.child(degree as u64).phase(phase::BASIS);
        let mut chosen: Vec<UnitVector> = Vec::with_capacity(h);
        let mut chol = GrowingCholesky::new();
        let diag = h as f64; // Z_l(x, x) = h_l for every x
        let tol = PIVOT_TOL * diag;
        while chosen.len() < h {
            let mut accepted = false;
            for _pool in 0..MAX_POOLS {
                let pool: Vec<UnitVector> =
                    (0..POOL_FACTOR * h).map(|_| uniform_unit(d, &mut rng)).collect();
                // Greedy step: the candidate with the largest Schur
                // complement maximizes the Gram determinant.
                let mut best: Option<(f64, Vec<f64>, &UnitVector)> = None;
                for cand in &pool {
                    let cross: Vec<f64> = chosen
                        .iter()
                        .map(|p| zonal_kernel_t(d, degree, p.dot(cand).clamp(-1.0, 1.0)))
                        .collect::<Result<_>>()?;
                    let y = chol.forward(&cross);
                    let s = GrowingCholesky::schur_complement(diag, &y);
                    if best.as_ref().map_or(true, |(bs, _, _)| s > *bs) {
                        best = Some((s, y, cand));
                    }
                }
                let (s, y, cand) = best.expect("pool is nonempty");
                if s > tol {
                    chol.push(y, s);
                    chosen.push(cand.clone());
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::BasisConstruction {
                    degree,
                    reason: format!(
                        "no candidate pivot above {tol:.3e} after {MAX_POOLS} pools \
                         ({} of {h} points placed)",
                        chosen.len()
                    ),
                });
            }
        }
        Ok(FundamentalSet {
            degree,
            dim: d,
            points: chosen,
            factor: chol.rows_owned(),
        })
    }

    /// Deterministic construction restricted to a given candidate pool.
    /// Fails when the pool cannot supply h_l well-conditioned points.
    pub fn from_candidates(d: usize, degree: usize, pool: &[UnitVector]) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidDimension(d));
        }
        let h = harmonic_dim(d, degree);
        let diag = h as f64;
        let tol = PIVOT_TOL * diag;
        let mut chosen: Vec<UnitVector> = Vec::with_capacity(h);
        let mut chol = GrowingCholesky::new();
        for _ in 0..h {
            let mut best: Option<(f64, Vec<f64>, &UnitVector)> = None;
            for cand in pool {
                let cross: Vec<f64> = chosen
                    .iter()
                    .map(|p| zonal_kernel_t(d, degree, p.dot(cand).clamp(-1.0, 1.0)))
                    .collect::<Result<_>>()?;
                let y = chol.forward(&cross);
                let s = GrowingCholesky::schur_complement(diag, &y);
                if best.as_ref().map_or(true, |(bs, _, _)| s > *bs) {
                    best = Some((s, y, cand));
                }
            }
            match best {
                Some((s, y, cand)) if s > tol => {
                    chol.push(y, s);
                    chosen.push(cand.clone());
                }
                _ => {
                    return Err(Error::BasisConstruction {
                        degree,
                        reason: format!(
                            "candidate pool exhausted after {} of {h} points",
                            chosen.len()
                        ),
                    })
                }
            }
        }
        Ok(FundamentalSet {
            degree,
            dim: d,
            points: chosen,
            factor: chol.rows_owned(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    /// Pivots of the Gram Cholesky (squared diagonal entries).
    pub fn pivots(&self) -> Vec<f64> {
        self.factor
            .iter()
            .enumerate()
            .map(|(i, r)| r[i] * r[i])
            .collect()
    }

    /// Evaluate the orthonormal degree-l basis at x.
    pub fn eval(&self, x: &UnitVector) -> Vec<f64> {
        let cross: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                zonal_kernel_t(self.dim, self.degree, p.dot(x).clamp(-1.0, 1.0))
                    .expect("degree and dimension fixed at construction")
            })
            .collect();
        forward_solve(&self.factor, &cross)
    }
}

fn forward_solve(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; v.len()];
    for (i, row) in rows.iter().enumerate() {
        let mut s = v[i];
        for j in 0..i {
            s -= row[j] * y[j];
        }
        y[i] = s / row[i];
    }
    y
}

#[derive(Debug, Clone)]
enum DegreeBlock {
    /// d = 2: sqrt(2) (cos(l phi), sin(l phi)).
    Fourier { degree: usize },
    Zonal(FundamentalSet),
}

/// Evaluable orthonormal spherical-harmonic system up to a maximum degree.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    d: usize,
    max_degree: usize,
    seed_root: u64,
    /// blocks[l - 1] holds degree l.
    blocks: Vec<DegreeBlock>,
    dims: Vec<usize>,
}

impl HarmonicBasis {
    pub fn build(d: usize, max_degree: usize, seed: Seed) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let mut blocks = Vec::with_capacity(max_degree);
        for l in 1..=max_degree {
            if d == 2 {
                blocks.push(DegreeBlock::Fourier { degree: l });
            } else {
                blocks.push(DegreeBlock::Zonal(FundamentalSet::build(d, l, seed)?));
            }
        }
        let dims = (0..=max_degree).map(|l| harmonic_dim(d, l)).collect();
        Ok(HarmonicBasis {
            d,
            max_degree,
            seed_root: seed.root(),
            blocks,
            dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn seed_root(&self) -> u64 {
        self.seed_root
    }

    /// h_l for l within range.
    pub fn degree_dim(&self, l: usize) -> usize {
        self.dims[l]
    }

    /// Number of harmonics with degree in 1..=l.
    pub fn count_up_to(&self, l: usize) -> usize {
        self.dims[1..=l].iter().sum()
    }

    /// Evaluate (Y_k^l(x))_k for one degree; degree 0 is the constant 1.
    pub fn eval_degree(&self, l: usize, x: &UnitVector) -> Result<Vec<f64>> {
        if l > self.max_degree {
            return Err(Error::DegreeOutOfRange(l, self.max_degree));
        }
        if x.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.dim(),
            });
        }
        if l == 0 {
            return Ok(vec![1.0]);
        }
        Ok(match &self.blocks[l - 1] {
            DegreeBlock::Fourier { degree } => {
                let phi = x[1].atan2(x[0]);
                let arg = *degree as f64 * phi;
                let scale = std::f64::consts::SQRT_2;
                vec![scale * arg.cos(), scale * arg.sin()]
            }
            DegreeBlock::Zonal(set) => set.eval(x),
        })
    }

    /// Stacked evaluation of all degrees 1..=l in lexicographic (l, k) order.
    pub fn eval_up_to(&self, l: usize, x: &UnitVector) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.count_up_to(l));
        for degree in 1..=l {
            out.extend(self.eval_degree(degree, x)?);
        }
        Ok(out)
    }

    /// Portable text serialization (self-describing header, 17 significant
    /// digits). Circle bases are closed-form and carry no point data.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("swquad-basis v1\n");
        out.push_str(&format!(
            "d {} max_degree {} seed {}\n",
            self.d, self.max_degree, self.seed_root
        ));
        for block in &self.blocks {
            if let DegreeBlock::Zonal(set) = block {
                out.push_str(&format!("degree {} h {}\n", set.degree, set.len()));
                for p in &set.points {
                    let coords: Vec<String> =
                        p.coords().iter().map(|c| format!("{c:.17e}")).collect();
                    out.push_str(&format!("point {}\n", coords.join(" ")));
                }
                for row in &set.factor {
                    let vals: Vec<String> = row.iter().map(|c| format!("{c:.17e}")).collect();
                    out.push_str(&format!("row {}\n", vals.join(" ")));
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines().enumerate();
        let perr = |line: usize, message: &str| Error::Parse {
            path: path.display().to_string(),
            line: line + 1,
            message: message.to_string(),
        };
        let (i, header) = lines
            .next()
            .ok_or_else(|| perr(0, "empty file"))
            .and_then(|(i, r)| r.map(|s| (i, s)).map_err(|e| perr(i, &e.to_string())))?;
        if header.trim() != "swquad-basis v1" {
            return Err(perr(i, "unrecognized header"));
        }
        let (i, meta) = lines
            .next()
            .ok_or_else(|| perr(1, "missing metadata"))
            .and_then(|(i, r)| r.map(|s| (i, s)).map_err(|e| perr(i, &e.to_string())))?;
        let toks: Vec<&str> = meta.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "d" || toks[2] != "max_degree" || toks[4] != "seed" {
            return Err(perr(i, "bad metadata line"));
        }
        let d: usize = toks[1].parse().map_err(|_| perr(i, "bad d"))?;
        let max_degree: usize = toks[3].parse().map_err(|_| perr(i, "bad max_degree"))?;
        let seed_root: u64 = toks[5].parse().map_err(|_| perr(i, "bad seed"))?;

        let mut blocks = Vec::with_capacity(max_degree);
        if d == 2 {
            for l in 1..=max_degree {
                blocks.push(DegreeBlock::Fourier { degree: l });
            }
        } else {
            for l in 1..=max_degree {
                let (i, head) = lines
                    .next()
                    .ok_or_else(|| perr(0, "truncated file"))
                    .and_then(|(i, r)| r.map(|s| (i, s)).map_err(|e| perr(i, &e.to_string())))?;
                let toks: Vec<&str> = head.split_whitespace().collect();
                if toks.len() != 4 || toks[0] != "degree" || toks[2] != "h" {
                    return Err(perr(i, "bad degree header"));
                }
                let got_l: usize = toks[1].parse().map_err(|_| perr(i, "bad degree"))?;
                let h: usize = toks[3].parse().map_err(|_| perr(i, "bad h"))?;
                if got_l != l || h != harmonic_dim(d, l) {
                    return Err(perr(i, "degree block does not match dimensions"));
                }
                let mut points = Vec::with_capacity(h);
                for _ in 0..h {
                    let (i, line) = lines
                        .next()
                        .ok_or_else(|| perr(0, "truncated points"))
                        .and_then(|(i, r)| r.map(|s| (i, s)).map_err(|e| perr(i, &e.to_string())))?;
                    let mut toks = line.split_whitespace();
                    if toks.next() != Some("point") {
                        return Err(perr(i, "expected point line"));
                    }
                    let coords: Vec<f64> = toks
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| perr(i, "bad point coordinates"))?;
                    points.push(
                        UnitVector::new(coords).map_err(|e| perr(i, &e.to_string()))?,
                    );
                }
                let mut factor = Vec::with_capacity(h);
                for r in 0..h {
                    let (i, line) = lines
                        .next()
                        .ok_or_else(|| perr(0, "truncated factor"))
                        .and_then(|(i, rr)| rr.map(|s| (i, s)).map_err(|e| perr(i, &e.to_string())))?;
                    let mut toks = line.split_whitespace();
                    if toks.next() != Some("row") {
                        return Err(perr(i, "expected row line"));
                    }
                    let vals: Vec<f64> = toks
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| perr(i, "bad row entries"))?;
                    if vals.len() != r + 1 {
                        return Err(perr(i, "row length mismatch"));
                    }
                    factor.push(vals);
                }
                blocks.push(DegreeBlock::Zonal(FundamentalSet {
                    degree: l,
                    dim: d,
                    points,
                    factor,
                }));
            }
        }
        let dims = (0..=max_degree).map(|l| harmonic_dim(d, l)).collect();
        Ok(HarmonicBasis {
            d,
            max_degree,
            seed_root,
            blocks,
            dims,
        })
    }
}

type CacheKey = (usize, usize, u64);
static BASIS_CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<HarmonicBasis>>>> = OnceLock::new();

/// Basis lookup keyed by (d, max_degree, seed), with an optional on-disk
/// cache directory. Construction cost is amortized across estimator calls.
pub fn basis_cache_get_or_build(
    d: usize,
    max_degree: usize,
    seed: Seed,
    cache_dir: Option<&Path>,
) -> Result<Arc<HarmonicBasis>> {
    let key = (d, max_degree, seed.root());
    let cache = BASIS_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let file = cache_dir.map(|dir| dir.join(format!("sh_d{d}_L{max_degree}_seed{}.txt", seed.root())));
    let basis = match &file {
        Some(path) if path.exists() => match HarmonicBasis::load(path) {
            Ok(b) if b.dim() == d && b.max_degree() == max_degree => Arc::new(b),
            _ => Arc::new(HarmonicBasis::build(d, max_degree, seed)?),
        },
        _ => {
            let built = Arc::new(HarmonicBasis::build(d, max_degree, seed)?);
            if let Some(path) = &file {
                // Cache write failures are not fatal; the basis is in memory.
                let _ = built.save(path);
            }
            built
        }
    };
    cache.lock().unwrap().insert(key, basis.clone());
    Ok(basis)
}
