//! Uniform lattice on [-1,1]^n (n = 2 or 3) classified against the open
//! unit ball and the constrained hyperplane {x_n = 0}, plus the
//! second-difference stencils built on it.
//!
//! Node classes partition the lattice:
//! - INTERIOR: off-plane node whose full cube stencil stays strictly
//!   inside the ball and which sits farther than h from the sphere;
//! - THIN: plane node with |x| < 1 - 2h (strict), so centered and
//!   second-order one-sided normal stencils never leave the ball;
//! - BOUNDARY: every other node inside the ball (Dirichlet data holders);
//! - EXTERIOR: |x| >= 1.
//!
//! The normal direction is always the last coordinate axis. Coordinates
//! are computed as (index - mid) * h so plane nodes carry x_n = 0 exactly
//! and the lattice is exactly symmetric under x_n -> -x_n.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::SymMat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Thin,
    Boundary,
    Exterior,
}

impl NodeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Thin => "thin",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub size: usize,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridError {
    InvalidSpec(&'static str),
}

impl GridError {
    pub fn kind(&self) -> &'static str {
        "invalid-spec"
    }

    pub fn message(&self) -> &'static str {
        match self {
            GridError::InvalidSpec(m) => m,
        }
    }
}

impl core::fmt::Display for GridError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilError {
    OutOfDomain,
}

impl StencilError {
    pub fn kind(&self) -> &'static str {
        "stencil-out-of-domain"
    }
}

impl core::fmt::Display for StencilError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.kind())
    }
}

impl GridSpec {
    pub fn new(n: usize, size: usize) -> Result<Self, GridError> {
        if n != 2 && n != 3 {
            return Err(GridError::InvalidSpec("dimension must be 2 or 3"));
        }
        if size < 9 {
            return Err(GridError::InvalidSpec("grid size must be at least 9"));
        }
        if size.is_multiple_of(2) {
            return Err(GridError::InvalidSpec("grid size must be odd"));
        }
        Ok(GridSpec {
            n,
            size,
            h: 2.0 / (size as f64 - 1.0),
        })
    }

    /// Refined spec with spacing h/2 over the same box.
    pub fn refined(&self) -> GridSpec {
        GridSpec::new(self.n, 2 * self.size - 1).expect("refinement keeps validity")
    }

    pub fn node_count(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    #[inline]
    pub fn mid(&self) -> usize {
        (self.size - 1) / 2
    }

    #[inline]
    pub fn flat(&self, ijk: [usize; 3]) -> usize {
        match self.n {
            2 => ijk[1] * self.size + ijk[0],
            _ => (ijk[2] * self.size + ijk[1]) * self.size + ijk[0],
        }
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        match self.n {
            2 => [idx % self.size, idx / self.size, 0],
            _ => {
                let i = idx % self.size;
                let rest = idx / self.size;
                [i, rest % self.size, rest / self.size]
            }
        }
    }

    /// Node coordinates, padded with 0 beyond dimension n.
    /// Exact zero on the mid-plane by construction.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let ijk = self.ijk(idx);
        let mid = self.mid() as f64;
        let mut x = [0.0; 3];
        for d in 0..self.n {
            x[d] = (ijk[d] as f64 - mid) * self.h;
        }
        x
    }

    #[inline]
    pub fn radius2(&self, idx: usize) -> f64 {
        let x = self.position(idx);
        x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    }

    /// Flat index of the node offset by `off` lattice steps, or None when
    /// the offset leaves the lattice box.
    #[inline]
    pub fn offset(&self, idx: usize, off: [i64; 3]) -> Option<usize> {
        let ijk = self.ijk(idx);
        let mut out = [0usize; 3];
        for d in 0..self.n {
            let v = ijk[d] as i64 + off[d];
            if v < 0 || v >= self.size as i64 {
                return None;
            }
            out[d] = v as usize;
        }
        for d in self.n..3 {
            if off[d] != 0 {
                return None;
            }
        }
        Some(self.flat(out))
    }

    /// Mirror image across the plane {x_n = 0}; exact on the lattice.
    #[inline]
    pub fn reflect(&self, idx: usize) -> usize {
        let mut ijk = self.ijk(idx);
        let axis = self.n - 1;
        ijk[axis] = self.size - 1 - ijk[axis];
        self.flat(ijk)
    }
}

pub struct Grid {
    pub spec: GridSpec,
    class: Vec<NodeClass>,
    interior: Vec<usize>,
    thin: Vec<usize>,
    boundary: Vec<usize>,
    /// All in-ball plane nodes (THIN plus plane BOUNDARY), ordered.
    plane: Vec<usize>,
}

/// Builds and classifies the lattice. The THIN threshold |x| < 1 - 2h is
/// strict: a plane node at exactly 2h from the sphere is BOUNDARY.
pub fn build_grid(n: usize, size: usize) -> Result<Grid, GridError> {
    let spec = GridSpec::new(n, size)?;
    let total = spec.node_count();
    let mut class = vec![NodeClass::Exterior; total];
    let mut interior = Vec::new();
    let mut thin = Vec::new();
    let mut boundary = Vec::new();
    let mut plane = Vec::new();

    let thin_r2 = (1.0 - 2.0 * spec.h) * (1.0 - 2.0 * spec.h);
    let int_r2 = (1.0 - spec.h) * (1.0 - spec.h);
    let axis = n - 1;

    for idx in 0..total {
        let x = spec.position(idx);
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 >= 1.0 {
            continue;
        }
        let on_plane = x[axis] == 0.0;
        if on_plane {
            plane.push(idx);
            if r2 < thin_r2 {
                class[idx] = NodeClass::Thin;
                thin.push(idx);
            } else {
                class[idx] = NodeClass::Boundary;
                boundary.push(idx);
            }
            continue;
        }
        let mut cube_inside = r2 < int_r2;
        if cube_inside {
            'cube: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    for dk in -1i64..=1 {
                        if n == 2 && dk != 0 {
                            continue;
                        }
                        if di == 0 && dj == 0 && dk == 0 {
                            continue;
                        }
                        match spec.offset(idx, [di, dj, dk]) {
                            Some(nb) if spec.radius2(nb) < 1.0 => {}
                            _ => {
                                cube_inside = false;
                                break 'cube;
                            }
                        }
                    }
                }
            }
        }
        if cube_inside {
            class[idx] = NodeClass::Interior;
            interior.push(idx);
        } else {
            class[idx] = NodeClass::Boundary;
            boundary.push(idx);
        }
    }

    Ok(Grid {
        spec,
        class,
        interior,
        thin,
        boundary,
        plane,
    })
}

impl Grid {
    #[inline]
    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn thin_nodes(&self) -> &[usize] {
        &self.thin
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn plane_nodes(&self) -> &[usize] {
        &self.plane
    }

    #[inline]
    pub fn is_equation_node(&self, idx: usize) -> bool {
        matches!(self.class[idx], NodeClass::Interior | NodeClass::Thin)
    }

    #[inline]
    pub fn normal_axis(&self) -> usize {
        self.spec.n - 1
    }

    /// Flat index of the plane node under (x', 0) for any in-ball node.
    #[inline]
    pub fn plane_projection(&self, idx: usize) -> usize {
        let mut ijk = self.spec.ijk(idx);
        ijk[self.normal_axis()] = self.spec.mid();
        self.spec.flat(ijk)
    }
}

/// Scalar lattice field. Values at EXTERIOR nodes are carried as 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(spec: GridSpec, v: f64) -> Self {
        ScalarField {
            spec,
            values: vec![v; spec.node_count()],
        }
    }

    /// Evaluates `f` at every non-EXTERIOR node position.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let spec = grid.spec;
        let mut values = vec![0.0; spec.node_count()];
        for idx in 0..spec.node_count() {
            if grid.class(idx) != NodeClass::Exterior {
                values[idx] = f(spec.position(idx));
            }
        }
        ScalarField { spec, values }
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    /// Max of |f| over a node set.
    pub fn sup_norm_over(&self, nodes: &[usize]) -> f64 {
        nodes
            .iter()
            .fold(0.0f64, |m, &i| m.max(self.values[i].abs()))
    }
}

#[inline]
fn axis_offset(axis: usize, step: i64) -> [i64; 3] {
    let mut o = [0i64; 3];
    o[axis] = step;
    o
}

/// Centered second difference along a lattice direction `dir` (entries in
/// {-1,0,1}): (f(x + h dir) - 2 f(x) + f(x - h dir)) / (h |dir|)^2.
pub fn second_difference(
    grid: &Grid,
    field: &ScalarField,
    idx: usize,
    dir: [i64; 3],
) -> Result<f64, StencilError> {
    debug_assert_eq!(grid.spec, field.spec);
    let spec = grid.spec;
    let plus = spec.offset(idx, dir).ok_or(StencilError::OutOfDomain)?;
    let minus = spec
        .offset(idx, [-dir[0], -dir[1], -dir[2]])
        .ok_or(StencilError::OutOfDomain)?;
    if grid.class(plus) == NodeClass::Exterior || grid.class(minus) == NodeClass::Exterior {
        return Err(StencilError::OutOfDomain);
    }
    let len2: i64 = dir.iter().map(|d| d * d).sum();
    let denom = spec.h * spec.h * len2 as f64;
    Ok((field.at(plus) - 2.0 * field.at(idx) + field.at(minus)) / denom)
}

/// Discrete Hessian at an INTERIOR or THIN node: centered 3-point second
/// differences on the diagonal and the 4-point cross
/// (f(+,+) + f(-,-) - f(+,-) - f(-,+)) / (4 h^2) off the diagonal.
/// Exact on quadratics.
pub fn discrete_hessian(
    grid: &Grid,
    field: &ScalarField,
    idx: usize,
) -> Result<SymMat, StencilError> {
    debug_assert_eq!(grid.spec, field.spec);
    if !grid.is_equation_node(idx) {
        return Err(StencilError::OutOfDomain);
    }
    let spec = grid.spec;
    let n = spec.n;
    let h2 = spec.h * spec.h;
    let mut m = SymMat::zero(n);
    for d in 0..n {
        m.a[d][d] = second_difference(grid, field, idx, axis_offset(d, 1))?;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut off = [0i64; 3];
            off[i] = 1;
            off[j] = 1;
            let pp = spec.offset(idx, off).ok_or(StencilError::OutOfDomain)?;
            let mm = spec
                .offset(idx, [-off[0], -off[1], -off[2]])
                .ok_or(StencilError::OutOfDomain)?;
            off[j] = -1;
            let pm = spec.offset(idx, off).ok_or(StencilError::OutOfDomain)?;
            let mp = spec
                .offset(idx, [-off[0], -off[1], -off[2]])
                .ok_or(StencilError::OutOfDomain)?;
            for nb in [pp, mm, pm, mp] {
                if grid.class(nb) == NodeClass::Exterior {
                    return Err(StencilError::OutOfDomain);
                }
            }
            let v = (field.at(pp) + field.at(mm) - field.at(pm) - field.at(mp)) / (4.0 * h2);
            m.a[i][j] = v;
            m.a[j][i] = v;
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Second-order one-sided normal derivative at a THIN node:
/// (-3 f(0) + 4 f(s h) - f(2 s h)) / (2 s h) with s = +-1.
/// Exact on quadratics in x_n.
pub fn one_sided_normal_derivative(
    grid: &Grid,
    field: &ScalarField,
    idx: usize,
    side: Side,
) -> Result<f64, StencilError> {
    debug_assert_eq!(grid.spec, field.spec);
    if grid.class(idx) != NodeClass::Thin {
        return Err(StencilError::OutOfDomain);
    }
    let axis = grid.normal_axis();
    let s: i64 = match side {
        Side::Above => 1,
        Side::Below => -1,
    };
    let spec = grid.spec;
    let n1 = spec
        .offset(idx, axis_offset(axis, s))
        .ok_or(StencilError::OutOfDomain)?;
    let n2 = spec
        .offset(idx, axis_offset(axis, 2 * s))
        .ok_or(StencilError::OutOfDomain)?;
    if grid.class(n1) == NodeClass::Exterior || grid.class(n2) == NodeClass::Exterior {
        return Err(StencilError::OutOfDomain);
    }
    let sh = s as f64 * spec.h;
    Ok((-3.0 * field.at(idx) + 4.0 * field.at(n1) - field.at(n2)) / (2.0 * sh))
}
