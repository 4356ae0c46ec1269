//! Forward kinematics of the arm in the UAV body frame.
//!
//! Link frames follow the modified (Craig) Denavit-Hartenberg convention: the
//! transform from frame `i-1` to frame `i` is
//!
//! ```text
//! T = RotX(alpha_{i-1}) · TransX(a_{i-1}) · RotZ(theta_i) · TransZ(d_i)
//!
//!     | cθ      -sθ      0     a     |
//!   = | sθ·cα   cθ·cα   -sα   -sα·d  |
//!     | sθ·sα   cθ·sα    cα    cα·d  |
//!     | 0        0       0     1     |
//! ```
//!
//! with `theta_i = q_i + theta_offset`. Frame 0 is the arm base, placed in the
//! body frame by a configurable mount transform (identity by default).

use nalgebra::{Matrix4, Matrix6x4};

use crate::{math, Error, Mat3, Result, Vec3, Vec4, DOF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub alpha_prev: f64,
    pub a_prev: f64,
    pub d: f64,
    pub theta_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub mass: f64,
    /// Centre of mass in the link frame [m].
    pub com: Vec3,
    /// Inertia about the centre of mass, link-frame axes [kg·m²].
    pub inertia_com: Mat3,
}

impl LinkParams {
    /// Checks mass positivity, symmetry, positive definiteness and the
    /// triangle inequalities on the principal moments.
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("link mass {} must be > 0", self.mass)));
        }
        if !self.com.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("link CoM must be finite".into()));
        }
        let asym = math::max_abs(&(self.inertia_com - self.inertia_com.transpose()));
        if asym > 1e-12 {
            return Err(Error::InvalidParameter(format!("link inertia not symmetric ({asym:.2e})")));
        }
        let eig = self.inertia_com.symmetric_eigenvalues();
        if eig.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidParameter("link inertia not positive definite".into()));
        }
        let tol = 1e-12 * eig.max();
        for k in 0..3 {
            if eig[k] > eig[(k + 1) % 3] + eig[(k + 2) % 3] + tol {
                return Err(Error::InvalidParameter(
                    "link principal moments violate the triangle inequality".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Rigid transform `p ↦ rotation·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for HomogeneousTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl HomogeneousTransform {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Frame `i-1` → frame `i` transform for joint angle `q_i`.
pub fn dh_transform(row: &DhRow, q_i: f64) -> HomogeneousTransform {
    let theta = q_i + row.theta_offset;
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha_prev.sin_cos();
    let rotation = Mat3::new(ct, -st, 0.0, st * ca, ct * ca, -sa, st * sa, ct * sa, ca);
    let translation = Vec3::new(row.a_prev, -sa * row.d, ca * row.d);
    HomogeneousTransform { rotation, translation }
}

/// Joint angles, rates and accelerations of the arm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManipulatorState {
    pub q: Vec4,
    pub qd: Vec4,
    pub qdd: Vec4,
}

impl ManipulatorState {
    pub fn at_rest(q: Vec4) -> Self {
        Self { q, qd: Vec4::zeros(), qdd: Vec4::zeros() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub dh: [DhRow; DOF],
    pub links: [LinkParams; DOF],
    /// Arm base frame expressed in the UAV body frame.
    pub mount: HomogeneousTransform,
}

/// Everything the inertia module needs from one forward-kinematics pass.
#[derive(Debug, Clone)]
pub struct ArmKinematics {
    /// `ᴮT_i`, body ← link `i`.
    pub transforms: [HomogeneousTransform; DOF],
    /// `ᴮp_ci`.
    pub com_positions: [Vec3; DOF],
    /// `ᴮJ_ci`, rows 0..3 linear, 3..6 angular.
    pub jacobians: [Matrix6x4<f64>; DOF],
}

impl ArmModel {
    /// OpenMANIPULATOR-X parameters: masses, CoM offsets and inertias per link
    /// plus its modified DH table.
    pub fn reference() -> Self {
        let link = |mass: f64, com: [f64; 3], i: [f64; 9]| LinkParams {
            mass,
            com: Vec3::from(com),
            inertia_com: Mat3::from_row_slice(&i) * 1e-4,
        };
        let links = [
            link(
                0.238,
                [-0.006794, 0.000253, -0.048813],
                [2.90202, 0.00335, 0.32543, 0.00335, 3.24158, 0.02059, 0.32543, 0.02059, 1.41275],
            ),
            link(
                0.123,
                [0.107084, -0.010616, 0.000467],
                [0.33028, -0.06189, 0.01212, -0.06189, 1.84812, -0.0002, 0.01212, -0.0002, 1.89169],
            ),
            link(
                0.118,
                [0.094329, 0.0, 0.000489],
                [0.20796, 0.00002, 0.01064, 0.00002, 1.45545, 0.0, 0.01064, 0.0, 1.38574],
            ),
            link(
                0.224,
                [0.060527, -0.006058, -0.000021],
                [1.43765, 0.21123, 0.00001, 0.21123, 2.12697, 0.00485, 0.00001, 0.00485, 1.80588],
            ),
        ];
        let row = |alpha_prev, a_prev, d, theta_offset| DhRow { alpha_prev, a_prev, d, theta_offset };
        let dh = [
            row(0.0, 0.012, 0.0935, 0.0),
            row(-std::f64::consts::FRAC_PI_2, 0.0, 0.0, -1.3855),
            row(0.0, 0.13023, 0.0, 1.3855),
            row(0.0, 0.124, 0.0, 0.0),
        ];
        Self { dh, links, mount: HomogeneousTransform::identity() }
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    /// Upper bound on the distance from the arm base to any link frame origin.
    pub fn max_reach(&self) -> f64 {
        self.dh.iter().map(|r| r.a_prev.abs() + r.d.abs()).sum()
    }

    /// `ᴮT_i = mount · T_1 · … · T_i` for each link.
    pub fn chain_transforms(&self, q: &Vec4) -> [HomogeneousTransform; DOF] {
        let mut out = [HomogeneousTransform::identity(); DOF];
        let mut acc = self.mount;
        for i in 0..DOF {
            acc = acc.compose(&dh_transform(&self.dh[i], q[i]));
            out[i] = acc;
        }
        out
    }

    pub fn link_com_positions(&self, q: &Vec4) -> [Vec3; DOF] {
        let t = self.chain_transforms(q);
        std::array::from_fn(|i| t[i].apply(&self.links[i].com))
    }

    /// CoM Jacobian of one link (zero-based index).
    pub fn com_jacobian(&self, q: &Vec4, link: usize) -> Result<Matrix6x4<f64>> {
        if link >= DOF {
            return Err(Error::LinkIndex(link));
        }
        Ok(self.kinematics(q).jacobians[link])
    }

    pub fn link_com_velocities(&self, q: &Vec4, qd: &Vec4) -> [(Vec3, Vec3); DOF] {
        let k = self.kinematics(q);
        std::array::from_fn(|i| {
            let v = k.jacobians[i] * qd;
            (v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
        })
    }

    /// Transforms, CoM positions and all CoM Jacobians in one pass.
    pub fn kinematics(&self, q: &Vec4) -> ArmKinematics {
        let transforms = self.chain_transforms(q);
        let com_positions: [Vec3; DOF] = std::array::from_fn(|i| transforms[i].apply(&self.links[i].com));
        let jacobians = std::array::from_fn(|i| {
            let mut jac = Matrix6x4::zeros();
            for j in 0..=i {
                let axis = transforms[j].rotation.column(2).into_owned();
                let lever = com_positions[i] - transforms[j].translation;
                jac.fixed_view_mut::<3, 1>(0, j).copy_from(&axis.cross(&lever));
                jac.fixed_view_mut::<3, 1>(3, j).copy_from(&axis);
            }
            jac
        });
        ArmKinematics { transforms, com_positions, jacobians }
    }
}
