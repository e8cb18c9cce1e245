//! Cone algebra for the product cone `R+^l x S+^{m_1} x ... x S+^{m_k}`.
//!
//! PSD blocks are stored in `svec` form: the lower triangle in column-major
//! order with off-diagonal entries scaled by `sqrt(2)`, so the Euclidean dot
//! product of two `svec`s equals the trace inner product of the matrices.
//!
//! Scaled quantities follow the Nesterov-Todd convention: for interior
//! `s`, `z` there is a scaling `W` with `W z = W^{-T} s = lambda`, where
//! `lambda` is diagonal on every PSD block. Diagonal vectors such as
//! `lambda` are stored compactly (`m` entries per PSD block).

use nalgebra::{DMatrix, DVector};

use std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct ConeDims {
    pub nonneg: usize,
    pub psd: Vec<usize>,
}

/// Offsets of one PSD block inside a cone vector and inside a compact
/// diagonal vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PsdBlock {
    pub size: usize,
    pub offset: usize,
    pub diag_offset: usize,
}

impl PsdBlock {
    pub fn svec_len(&self) -> usize {
        svec_len(self.size)
    }
}

impl ConeDims {
    /// Length of a cone vector.
    pub fn len(&self) -> usize {
        self.nonneg + self.psd.iter().map(|&m| svec_len(m)).sum::<usize>()
    }

    /// Length of a compact diagonal vector such as `lambda`.
    pub fn diag_len(&self) -> usize {
        self.nonneg + self.psd.iter().sum::<usize>()
    }

    /// Barrier degree of the cone.
    pub fn degree(&self) -> usize {
        self.diag_len()
    }

    pub fn psd_blocks(&self) -> Vec<PsdBlock> {
        let mut offset = self.nonneg;
        let mut diag_offset = self.nonneg;
        self.psd
            .iter()
            .map(|&m| {
                let block = PsdBlock {
                    size: m,
                    offset,
                    diag_offset,
                };
                offset += svec_len(m);
                diag_offset += m;
                block
            })
            .collect()
    }
}

pub(crate) fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of entry `(i, j)` with `i >= j` inside an `svec` of order `m`.
pub(crate) fn svec_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < m);
    j * m - j * j.saturating_sub(1) / 2 + (i - j)
}

pub(crate) fn svec_into(mat: &DMatrix<f64>, out: &mut [f64]) {
    let m = mat.nrows();
    let mut k = 0;
    for j in 0..m {
        out[k] = mat[(j, j)];
        k += 1;
        for i in j + 1..m {
            out[k] = SQRT_2 * 0.5 * (mat[(i, j)] + mat[(j, i)]);
            k += 1;
        }
    }
}

pub(crate) fn smat(v: &[f64], m: usize) -> DMatrix<f64> {
    let mut mat = DMatrix::zeros(m, m);
    let mut k = 0;
    for j in 0..m {
        mat[(j, j)] = v[k];
        k += 1;
        for i in j + 1..m {
            let x = v[k] / SQRT_2;
            mat[(i, j)] = x;
            mat[(j, i)] = x;
            k += 1;
        }
    }
    mat
}

fn block_mat(v: &DVector<f64>, b: &PsdBlock) -> DMatrix<f64> {
    smat(&v.as_slice()[b.offset..b.offset + b.svec_len()], b.size)
}

fn write_block(out: &mut DVector<f64>, b: &PsdBlock, mat: &DMatrix<f64>) {
    svec_into(mat, &mut out.as_mut_slice()[b.offset..b.offset + b.svec_len()]);
}

/// `v += alpha * e`, with `e` the identity element of the cone.
pub(crate) fn add_identity(dims: &ConeDims, v: &mut DVector<f64>, alpha: f64) {
    for i in 0..dims.nonneg {
        v[i] += alpha;
    }
    for b in dims.psd_blocks() {
        for j in 0..b.size {
            v[b.offset + svec_index(b.size, j, j)] += alpha;
        }
    }
}

/// Expands a compact diagonal vector into a cone vector.
pub(crate) fn embed_diag(dims: &ConeDims, diag: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(dims.len());
    for i in 0..dims.nonneg {
        out[i] = diag[i];
    }
    for b in dims.psd_blocks() {
        for j in 0..b.size {
            out[b.offset + svec_index(b.size, j, j)] = diag[b.diag_offset + j];
        }
    }
    out
}

/// Jordan product `u o v`: elementwise on `R+`, `(UV + VU) / 2` on PSD blocks.
pub(crate) fn sprod(dims: &ConeDims, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(dims.len());
    for i in 0..dims.nonneg {
        out[i] = u[i] * v[i];
    }
    for b in dims.psd_blocks() {
        let um = block_mat(u, &b);
        let vm = block_mat(v, &b);
        let uv = &um * &vm;
        let prod = (&uv + uv.transpose()) * 0.5;
        write_block(&mut out, &b, &prod);
    }
    out
}

/// `lambda o u` for a diagonal `lambda` in compact storage.
pub(crate) fn sprod_diag(dims: &ConeDims, lambda: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut out = u.clone();
    for i in 0..dims.nonneg {
        out[i] *= lambda[i];
    }
    for b in dims.psd_blocks() {
        let l = &lambda.as_slice()[b.diag_offset..b.diag_offset + b.size];
        for j in 0..b.size {
            for i in j..b.size {
                out[b.offset + svec_index(b.size, i, j)] *= 0.5 * (l[i] + l[j]);
            }
        }
    }
    out
}

/// Solves `lambda o x = u` for `x`, with `lambda` diagonal and positive.
pub(crate) fn sinv_diag(dims: &ConeDims, lambda: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut out = u.clone();
    for i in 0..dims.nonneg {
        out[i] /= lambda[i];
    }
    for b in dims.psd_blocks() {
        let l = &lambda.as_slice()[b.diag_offset..b.diag_offset + b.size];
        for j in 0..b.size {
            for i in j..b.size {
                out[b.offset + svec_index(b.size, i, j)] /= 0.5 * (l[i] + l[j]);
            }
        }
    }
    out
}

/// Smallest `t` such that `v + t e` lies in the closed cone, i.e. the
/// negated smallest eigenvalue over all blocks. `-inf` for an empty cone.
pub(crate) fn max_step_unscaled(dims: &ConeDims, v: &DVector<f64>) -> f64 {
    let mut t = f64::NEG_INFINITY;
    for i in 0..dims.nonneg {
        t = t.max(-v[i]);
    }
    for b in dims.psd_blocks() {
        let eig = block_mat(v, &b).symmetric_eigenvalues();
        t = t.max(-eig.min());
    }
    t
}

/// Eigen-structure of a search direction relative to the current scaled point.
///
/// For a direction `dv` in scaled coordinates, `lambda + a dv` stays in the
/// cone iff `1 + a * sigma >= 0` for every `sigma` below, where `sigma` runs
/// over `dv_i / lambda_i` on `R+` and over the eigenvalues of
/// `Lambda^{-1/2} DV Lambda^{-1/2}` on PSD blocks.
pub(crate) struct DirectionSpectrum {
    pub nonneg: Vec<f64>,
    pub psd: Vec<(DVector<f64>, DMatrix<f64>)>,
}

impl DirectionSpectrum {
    pub fn compute(dims: &ConeDims, lambda: &DVector<f64>, dv: &DVector<f64>) -> Option<Self> {
        let nonneg = (0..dims.nonneg).map(|i| dv[i] / lambda[i]).collect();
        let mut psd = Vec::with_capacity(dims.psd.len());
        for b in dims.psd_blocks() {
            let mut m = block_mat(dv, &b);
            for j in 0..b.size {
                let lj = lambda[b.diag_offset + j].sqrt();
                for i in 0..b.size {
                    let li = lambda[b.diag_offset + i].sqrt();
                    m[(i, j)] /= li * lj;
                }
            }
            let eig = m.try_symmetric_eigen(f64::EPSILON, 0)?;
            if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
                return None;
            }
            psd.push((eig.eigenvalues, eig.eigenvectors));
        }
        Some(Self { nonneg, psd })
    }

    /// Largest `-sigma` over all blocks (may be negative).
    pub fn max_negative(&self) -> f64 {
        let mut t = f64::NEG_INFINITY;
        for &s in &self.nonneg {
            t = t.max(-s);
        }
        for (vals, _) in &self.psd {
            t = t.max(-vals.min());
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScaleOp {
    /// `W v`
    #[cfg_attr(not(test), allow(dead_code))]
    W,
    /// `W^T v`
    WTrans,
    /// `W^{-1} v`
    WInv,
    /// `W^{-T} v`
    WInvTrans,
}

const SVD_TOLERANCE: f64 = 1e-13;

/// Nesterov-Todd scaling. On `R+`, `W = diag(d)`; on a PSD block,
/// `W(V) = R^T V R` and `rti = R^{-T}` is kept alongside `R`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    d: DVector<f64>,
    r: Vec<DMatrix<f64>>,
    rti: Vec<DMatrix<f64>>,
}

impl Scaling {
    pub fn identity(dims: &ConeDims) -> Self {
        Self {
            d: DVector::from_element(dims.nonneg, 1.0),
            r: dims.psd.iter().map(|&m| DMatrix::identity(m, m)).collect(),
            rti: dims.psd.iter().map(|&m| DMatrix::identity(m, m)).collect(),
        }
    }

    /// Computes the scaling point of interior `s`, `z`; returns it with `lambda`.
    pub fn compute(dims: &ConeDims, s: &DVector<f64>, z: &DVector<f64>) -> Option<(Self, DVector<f64>)> {
        let mut lambda = DVector::zeros(dims.diag_len());
        let mut d = DVector::zeros(dims.nonneg);
        for i in 0..dims.nonneg {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            d[i] = (s[i] / z[i]).sqrt();
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut r = Vec::with_capacity(dims.psd.len());
        let mut rti = Vec::with_capacity(dims.psd.len());
        for b in dims.psd_blocks() {
            let ls = block_mat(s, &b).cholesky()?.unpack();
            let lz = block_mat(z, &b).cholesky()?.unpack();
            let (rb, rtib, lam) = nt_factors(&ls, &lz)?;
            lambda.as_mut_slice()[b.diag_offset..b.diag_offset + b.size].copy_from_slice(lam.as_slice());
            r.push(rb);
            rti.push(rtib);
        }
        Some((Self { d, r, rti }, lambda))
    }

    pub fn apply(&self, dims: &ConeDims, v: &DVector<f64>, op: ScaleOp) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..dims.nonneg {
            match op {
                ScaleOp::W | ScaleOp::WTrans => out[i] *= self.d[i],
                ScaleOp::WInv | ScaleOp::WInvTrans => out[i] /= self.d[i],
            }
        }
        for (k, b) in dims.psd_blocks().into_iter().enumerate() {
            let vm = block_mat(v, &b);
            let res = match op {
                ScaleOp::W => self.r[k].tr_mul(&vm) * &self.r[k],
                ScaleOp::WTrans => &self.r[k] * vm * self.r[k].transpose(),
                ScaleOp::WInv => &self.rti[k] * vm * self.rti[k].transpose(),
                ScaleOp::WInvTrans => self.rti[k].tr_mul(&vm) * &self.rti[k],
            };
            write_block(&mut out, &b, &res);
        }
        out
    }

    /// Applies `op` to every column of `m` (a matrix whose columns are cone vectors).
    pub fn apply_columns(&self, dims: &ConeDims, m: &DMatrix<f64>, op: ScaleOp) -> DMatrix<f64> {
        let mut out = m.clone();
        for j in 0..m.ncols() {
            let col = DVector::from_column_slice(m.column(j).as_slice());
            out.set_column(j, &self.apply(dims, &col, op));
        }
        out
    }

    /// Moves the scaled iterates `lambda + step * ds` and `lambda + step * dz`
    /// and refactors the scaling around the new point, replacing `lambda`.
    ///
    /// `spec_s` and `spec_z` must be the spectra of `ds` and `dz` relative
    /// to the current `lambda`.
    pub fn update(
        &mut self,
        dims: &ConeDims,
        lambda: &mut DVector<f64>,
        ds: &DVector<f64>,
        dz: &DVector<f64>,
        spec_s: &DirectionSpectrum,
        spec_z: &DirectionSpectrum,
        step: f64,
    ) -> Option<()> {
        for i in 0..dims.nonneg {
            let s = lambda[i] + step * ds[i];
            let z = lambda[i] + step * dz[i];
            if !(s > 0.0 && z > 0.0) {
                return None;
            }
            self.d[i] *= (s / z).sqrt();
            lambda[i] = (s * z).sqrt();
        }
        for (k, b) in dims.psd_blocks().into_iter().enumerate() {
            let lam = DVector::from_column_slice(&lambda.as_slice()[b.diag_offset..b.diag_offset + b.size]);
            let factor = |(vals, vecs): &(DVector<f64>, DMatrix<f64>)| -> Option<DMatrix<f64>> {
                let mut l = vecs.clone();
                for j in 0..b.size {
                    let g = 1.0 + step * vals[j];
                    if !(g > 0.0) {
                        return None;
                    }
                    l.column_mut(j).scale_mut(g.sqrt());
                }
                for i in 0..b.size {
                    l.row_mut(i).scale_mut(lam[i].sqrt());
                }
                Some(l)
            };
            let ls = factor(&spec_s.psd[k])?;
            let lz = factor(&spec_z.psd[k])?;
            let (rb, rtib, new_lam) = nt_factors(&ls, &lz)?;
            self.r[k] = &self.r[k] * rb;
            self.rti[k] = &self.rti[k] * rtib;
            lambda.as_mut_slice()[b.diag_offset..b.diag_offset + b.size].copy_from_slice(new_lam.as_slice());
        }
        Some(())
    }
}

/// Given factors `S = Ls Ls^T`, `Z = Lz Lz^T`, returns `(R, R^{-T}, lambda)` with
/// `R^{-1} S R^{-T} = R^T Z R = diag(lambda)`.
fn nt_factors(ls: &DMatrix<f64>, lz: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let (u, lam, v) = checked_svd(&lz.tr_mul(ls))?;
    if lam.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return None;
    }
    let mut r = ls * v;
    let mut rti = lz * u;
    for j in 0..lam.len() {
        let f = 1.0 / lam[j].sqrt();
        r.column_mut(j).scale_mut(f);
        rti.column_mut(j).scale_mut(f);
    }
    Some((r, rti, lam))
}

/// `M = U diag(sigma) V^T`, rejecting decompositions that do not reproduce `M`.
///
/// nalgebra's bidiagonal QR occasionally returns orthogonal factors with
/// relative reconstruction errors as large as 1e-1 on well-conditioned
/// input. The transpose usually decomposes cleanly when the original does
/// not; the eigenvectors of `M^T M` are the last resort.
fn checked_svd(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let tol = SVD_TOLERANCE * n as f64 * m.norm();
    let accept = |u: &DMatrix<f64>, sigma: &DVector<f64>, v: &DMatrix<f64>| {
        (u * DMatrix::from_diagonal(sigma) * v.transpose() - m).norm() <= tol
    };
    let svd = m.clone().svd(true, true);
    if let (Some(u), Some(vt)) = (svd.u, svd.v_t) {
        let v = vt.transpose();
        if accept(&u, &svd.singular_values, &v) {
            return Some((u, svd.singular_values, v));
        }
    }
    let svd = m.transpose().svd(true, true);
    if let (Some(ut), Some(vt)) = (svd.u, svd.v_t) {
        let u = vt.transpose();
        if accept(&u, &svd.singular_values, &ut) {
            return Some((u, svd.singular_values, ut));
        }
    }
    let eig = m.tr_mul(m).symmetric_eigen();
    let sigma = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let v = eig.eigenvectors;
    let mut u = m * &v;
    for j in 0..n {
        u.column_mut(j).unscale_mut(sigma[j]);
    }
    accept(&u, &sigma, &v).then_some((u, sigma, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ConeDims {
        ConeDims {
            nonneg: 2,
            psd: vec![3, 2],
        }
    }

    #[test]
    fn svec_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, -0.5, 1.0, 3.0, 0.25, -0.5, 0.25, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.0, -2.0, 0.5, 4.0, 0.0, 4.0, -1.0]);
        let mut va = vec![0.0; 6];
        let mut vb = vec![0.0; 6];
        svec_into(&a, &mut va);
        svec_into(&b, &mut vb);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - (a.transpose() * &b).trace()).abs() < 1e-12);
        assert!((smat(&va, 3) - a).norm() < 1e-14);
    }

    #[test]
    fn svec_index_matches_layout() {
        let m = 4;
        let mut k = 0;
        for j in 0..m {
            for i in j..m {
                assert_eq!(svec_index(m, i, j), k);
                k += 1;
            }
        }
    }

    #[test]
    fn sinv_inverts_sprod_diag() {
        let d = dims();
        let lambda = DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5, 3.0, 0.7, 1.1]);
        let u = DVector::from_fn(d.len(), |i, _| (i as f64 * 0.37).sin());
        let back = sinv_diag(&d, &lambda, &sprod_diag(&d, &lambda, &u));
        assert!((back - u).norm() < 1e-12);
    }

    #[test]
    fn nt_scaling_maps_both_points_to_lambda() {
        let d = dims();
        let mut s = DVector::zeros(d.len());
        let mut z = DVector::zeros(d.len());
        s[0] = 2.0;
        s[1] = 0.5;
        z[0] = 1.0;
        z[1] = 3.0;
        let blocks = d.psd_blocks();
        let sm = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let zm = DMatrix::from_row_slice(3, 3, &[1.0, -0.2, 0.1, -0.2, 2.0, 0.0, 0.1, 0.0, 0.5]);
        write_block(&mut s, &blocks[0], &sm);
        write_block(&mut z, &blocks[0], &zm);
        write_block(
            &mut s,
            &blocks[1],
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]),
        );
        write_block(
            &mut z,
            &blocks[1],
            &DMatrix::from_row_slice(2, 2, &[2.0, -0.4, -0.4, 1.0]),
        );

        let (w, lambda) = Scaling::compute(&d, &s, &z).unwrap();
        let lam_full = embed_diag(&d, &lambda);
        assert!((w.apply(&d, &z, ScaleOp::W) - &lam_full).norm() < 1e-12);
        assert!((w.apply(&d, &s, ScaleOp::WInvTrans) - &lam_full).norm() < 1e-12);
        let v = DVector::from_fn(d.len(), |i, _| (i as f64).cos());
        let round = w.apply(&d, &w.apply(&d, &v, ScaleOp::W), ScaleOp::WInv);
        assert!((round - &v).norm() < 1e-12);
        let round_t = w.apply(&d, &w.apply(&d, &v, ScaleOp::WTrans), ScaleOp::WInvTrans);
        assert!((round_t - &v).norm() < 1e-12);
        // s'z == ||lambda||^2
        assert!((s.dot(&z) - lambda.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn max_step_unscaled_reports_most_negative_eigenvalue() {
        let d = ConeDims {
            nonneg: 1,
            psd: vec![2],
        };
        let v = DVector::from_vec(vec![0.5, 1.0, 0.0, -2.0]);
        assert!((max_step_unscaled(&d, &v) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn checked_svd_reproduces_hard_matrix() {
        // Column-major; plain `svd` reconstructs this with relative error 1.5e-4.
        #[rustfmt::skip]
        let m = DMatrix::from_column_slice(10, 10, &[
        2.420259531550415e-7, -4.572935310953309e-6, -2.2449828398573962e-5, -1.9951150440464925e-5, 1.003449336324898e-5,
        1.3087420539577967e-6, -1.3255435747517737e-7, 2.2327750400165168e-5, -3.2717977105912455e-7, -3.549799945807344e-6,
        -0.0003167050173384223, -0.02250676931497078, 0.036193022178990064, -0.00032467950269287515, -0.009158627314726433,
        -0.003923924783881249, 0.00019056972741596085, -0.03446383741601852, 0.0008449119179590554, 0.005657715957446597,
        -6.450912393016382e-5, 0.19660371258105566, -0.022506616287986447, 0.03873353203483294, 0.013984339716150894,
        0.0329512174392447, -0.0033191785561049666, -0.00863496393746409, -0.0023118051278063437, -0.003002750360939555,
        0.0002814407690290199, -0.03873255759177462, 0.00032494792211415225, -0.23547823220881525, -0.008623742738363515,
        -0.02711126741793825, 0.003883960291425359, -0.004882902809909771, 0.001426668324963175, -0.003478981704993487,
        0.0001415534906560278, 0.01398427836689841, -0.00915822661470988, 0.008623826589127186, 0.24068763073816846,
        -0.0028061526235364114, 0.0005306601090757266, 0.018797820404896234, -0.002709012094695784, -0.004613048770327622,
        -1.8461901167027067e-5, -0.03295090903091901, 0.00392379896573356, -0.0271115991047948, 0.0028064256861764984,
        -0.30037931764096326, 0.00922244834753139, 0.01573295689476091, 0.001741620561604777, 0.0050886169621586035,
        -1.8698829447971576e-6, -0.0033191438171150255, 0.00019056111819082638, -0.00388400221450227, 0.0005306961197625084,
        -0.009222356481659297, 0.24670352481844623, 0.002898735571144206, 0.0001777194147633932, 0.0009338469260108662,
        -0.0003149683670221753, 0.008634885359151218, 0.034462302648950435, -0.004882931689498611, -0.018797702252641695,
        0.015732815569951448, -0.002898713383009744, -0.2673770511552397, 0.003229526639280274, 0.009127749495527457,
        -4.6153936628967995e-6, -0.002311765311625404, 0.0008448792478571074, -0.001426677237485173, -0.002708991749892558,
        -0.0017416102392540601, 0.00017771871622687452, -0.003229529056166675, 0.21850142284526358, -0.0009016246020272868,
        5.0075600015385566e-5, 0.003002688951037008, -0.0056574730590187835, -0.003479000293044636, 0.004613015931987875,
        0.005088585842444275, -0.000933842027823816, 0.009127762706754963, 0.0009016243268284008, -0.2284419231508398,
        ]);
        let (u, sigma, v) = checked_svd(&m).unwrap();
        assert!((&u * DMatrix::from_diagonal(&sigma) * v.transpose() - &m).norm() < 1e-12 * m.norm());
    }
}
