//! Cosserat rod: strain fields, kinematic integration, elastic energy,
//! measurement mismatch and the reconstruction objective
//! `J = U + (eta / 2) * Phi` with its exact gradient.
//!
//! The centerline is discretized on a grid of nodes. Each segment carries
//! the average of its two node strains and is advanced with the exact SE(3)
//! exponential, which gives a second-order scheme that is exact for
//! constant-strain rods. The gradient is the exact derivative of this
//! discretization, accumulated in reverse along the chain.

use crate::error::{Error, Result};
use crate::geom::{exp_se3_parts, exp_se3_pullback, Mat3, Pose, Rotation, Twist, Vec3, ORTHONORMAL_TOL};

/// Relative tolerance (in units of the rest length) for an arc length to
/// coincide with a grid node.
const NODE_SNAP: f64 = 1e-12;

/// Six strain components: curvatures/twist `kappa` and shears/stretch `nu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrainVector {
    pub kappa: Vec3,
    pub nu: Vec3,
}

impl StrainVector {
    pub fn new(kappa: Vec3, nu: Vec3) -> Self {
        StrainVector { kappa, nu }
    }

    /// Straight, unstretched rod: `kappa = 0`, `nu = (0, 0, 1)`.
    pub fn rest() -> Self {
        StrainVector::new(Vec3::zeros(), Vec3::z())
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        StrainVector::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]))
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.kappa.x, self.kappa.y, self.kappa.z, self.nu.x, self.nu.y, self.nu.z,
        ]
    }

    pub fn component(&self, i: usize) -> f64 {
        if i < 3 {
            self.kappa[i]
        } else {
            self.nu[i - 3]
        }
    }

    pub fn set_component(&mut self, i: usize, v: f64) {
        if i < 3 {
            self.kappa[i] = v;
        } else {
            self.nu[i - 3] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Positive stretch.
    pub fn is_admissible(&self) -> bool {
        self.is_finite() && self.nu.z > 0.0
    }

    pub fn as_twist(&self) -> Twist {
        Twist::new(self.kappa, self.nu)
    }
}

/// Geometry and elastic constants of the rod.
#[derive(Clone, Debug, PartialEq)]
pub struct RodProperties {
    pub length: f64,
    pub n_nodes: usize,
    pub stiffness_angular: Vec3,
    pub stiffness_linear: Vec3,
    pub rest_strain: StrainVector,
}

impl RodProperties {
    /// Unit diagonal stiffness, straight rest configuration.
    pub fn new(length: f64, n_nodes: usize) -> Result<Self> {
        let props = RodProperties {
            length,
            n_nodes,
            stiffness_angular: Vec3::repeat(1.0),
            stiffness_linear: Vec3::repeat(1.0),
            rest_strain: StrainVector::rest(),
        };
        props.validate()?;
        Ok(props)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::config("length_m", "must be positive"));
        }
        if self.n_nodes < 2 {
            return Err(Error::config("n_nodes", "must be at least 2"));
        }
        if self
            .stiffness_angular
            .iter()
            .chain(self.stiffness_linear.iter())
            .any(|k| !(*k > 0.0))
        {
            return Err(Error::config("stiffness", "all entries must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.length, self.n_nodes)
    }
}

/// `n` equally spaced arc lengths with endpoints exactly `0` and `length`.
pub fn uniform_grid(length: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                length
            } else {
                length * (i as f64) / last
            }
        })
        .collect()
}

/// A strain field sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainField {
    grid: Vec<f64>,
    values: Vec<StrainVector>,
}

impl StrainField {
    pub fn new(grid: Vec<f64>, values: Vec<StrainVector>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if grid.len() < 2 {
            return Err(Error::InvalidInput("strain field needs at least 2 nodes".into()));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidInput("grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        Ok(StrainField { grid, values })
    }

    pub fn constant(grid: Vec<f64>, value: StrainVector) -> Result<Self> {
        let values = vec![value; grid.len()];
        StrainField::new(grid, values)
    }

    /// Samples `f(s)` on the grid.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> StrainVector) -> Result<Self> {
        let values = grid.iter().map(|&s| f(s)).collect();
        StrainField::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[StrainVector] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [StrainVector] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Average strain of segment `n`, used over `[s_n, s_{n+1}]`.
    pub fn segment_strain(&self, n: usize) -> StrainVector {
        let (a, b) = (&self.values[n], &self.values[n + 1]);
        StrainVector::new((a.kappa + b.kappa) * 0.5, (a.nu + b.nu) * 0.5)
    }

    /// Node values flattened as `[kappa, nu]` per node.
    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.to_array()).collect()
    }

    pub fn from_flat(grid: Vec<f64>, flat: &[f64]) -> Result<Self> {
        if flat.len() != 6 * grid.len() {
            return Err(Error::LengthMismatch {
                expected: 6 * grid.len(),
                got: flat.len(),
            });
        }
        let values = flat
            .chunks_exact(6)
            .map(|c| StrainVector::from_array([c[0], c[1], c[2], c[3], c[4], c[5]]))
            .collect();
        StrainField::new(grid, values)
    }

    fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(Error::NonFiniteStrain { node }),
            None => Ok(()),
        }
    }
}

/// A marker: known arc length and measured pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marker {
    pub s: f64,
    pub pose: Pose,
}

/// Marker poses at strictly increasing arc lengths ending at the tip.
/// The base pose is known separately and is not a marker.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    markers: Vec<Marker>,
}

impl MeasurementSet {
    pub fn new(markers: Vec<Marker>, length: f64) -> Result<Self> {
        let Some(last) = markers.last() else {
            return Err(Error::InvalidInput("measurement set needs at least one marker".into()));
        };
        if !(markers[0].s > 0.0) {
            return Err(Error::InvalidInput("first marker must lie beyond the base".into()));
        }
        if markers.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(Error::InvalidInput("marker arc lengths must increase".into()));
        }
        if (last.s - length).abs() > NODE_SNAP * length {
            return Err(Error::InvalidInput(format!(
                "last marker must sit at the tip (s = {length}), got {}",
                last.s
            )));
        }
        Ok(MeasurementSet { markers })
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn arc_lengths(&self) -> Vec<f64> {
        self.markers.iter().map(|m| m.s).collect()
    }

    /// Applies `g * (.)` to every marker pose.
    pub fn transformed(&self, g: &Pose) -> MeasurementSet {
        MeasurementSet {
            markers: self
                .markers
                .iter()
                .map(|m| Marker {
                    s: m.s,
                    pose: g.compose(&m.pose),
                })
                .collect(),
        }
    }
}

/// Where an arc length falls on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Site {
    Node(usize),
    Inside { segment: usize, offset: f64 },
}

fn locate(grid: &[f64], s: f64) -> Result<Site> {
    let length = grid[grid.len() - 1];
    let snap = NODE_SNAP * length;
    if !(s >= -snap && s <= length + snap) {
        return Err(Error::OutOfRange { s, length });
    }
    // First node strictly greater than s.
    let upper = grid.partition_point(|&g| g <= s);
    if upper == 0 {
        return Ok(Site::Node(0));
    }
    let lower = upper - 1;
    if (s - grid[lower]).abs() <= snap {
        return Ok(Site::Node(lower));
    }
    if upper == grid.len() {
        return Ok(Site::Node(grid.len() - 1));
    }
    if (grid[upper] - s).abs() <= snap {
        return Ok(Site::Node(upper));
    }
    Ok(Site::Inside {
        segment: lower,
        offset: s - grid[lower],
    })
}

/// Segment exponential with its scaled arguments kept for the pullback.
struct Step {
    phi: Vec3,
    rho: Vec3,
    rot: Mat3,
    pos: Vec3,
}

impl Step {
    fn new(strain: &StrainVector, h: f64) -> Self {
        let phi = strain.kappa * h;
        let rho = strain.nu * h;
        let (rot, pos) = exp_se3_parts(&phi, &rho);
        Step { phi, rho, rot, pos }
    }
}

/// Forward pass: node poses plus the per-segment steps.
struct Chain {
    rots: Vec<Mat3>,
    positions: Vec<Vec3>,
    steps: Vec<Step>,
}

impl Chain {
    fn integrate(field: &StrainField, base: &Pose) -> Result<Self> {
        field.check_finite()?;
        let n = field.len();
        let mut rots = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n - 1);
        let mut rot = *base.rotation.matrix();
        let mut pos = base.position;
        rots.push(rot);
        positions.push(pos);
        for k in 0..n - 1 {
            let h = field.grid[k + 1] - field.grid[k];
            let step = Step::new(&field.segment_strain(k), h);
            pos += rot * step.pos;
            rot *= step.rot;
            // Drift grows by roughly one ulp per step; checking periodically
            // is enough to keep every node within tolerance.
            if (k % 16 == 15 || k + 2 == n)
                && Rotation::from_matrix_unchecked(rot).orthonormality_error() > ORTHONORMAL_TOL
            {
                rot = *Rotation::from_matrix_unchecked(rot).renormalized().matrix();
            }
            rots.push(rot);
            positions.push(pos);
            steps.push(step);
        }
        Ok(Chain {
            rots,
            positions,
            steps,
        })
    }

    fn node_pose(&self, n: usize) -> Pose {
        Pose::new(Rotation::from_matrix_unchecked(self.rots[n]), self.positions[n])
    }

    fn poses(&self) -> Vec<Pose> {
        (0..self.rots.len()).map(|n| self.node_pose(n)).collect()
    }
}

/// Integrates the kinematic equation from `base`, returning one pose per
/// grid node.
pub fn integrate_kinematics(field: &StrainField, base: &Pose) -> Result<Vec<Pose>> {
    Ok(Chain::integrate(field, base)?.poses())
}

/// Pose at arc length `s`. Nodes are returned as-is; between nodes a
/// partial step with the enclosing segment's strain is taken from the
/// lower node.
pub fn interpolate_pose(field: &StrainField, poses: &[Pose], s: f64) -> Result<Pose> {
    if poses.len() != field.len() {
        return Err(Error::LengthMismatch {
            expected: field.len(),
            got: poses.len(),
        });
    }
    match locate(field.grid(), s)? {
        Site::Node(n) => Ok(poses[n]),
        Site::Inside { segment, offset } => {
            let step = Step::new(&field.segment_strain(segment), offset);
            let local = Pose::new(Rotation::from_matrix_unchecked(step.rot), step.pos);
            Ok(poses[segment].compose(&local))
        }
    }
}

/// Trapezoid weights of the grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let half = 0.5 * (grid[k + 1] - grid[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    w
}

fn energy_density(v: &StrainVector, props: &RodProperties) -> f64 {
    let dk = v.kappa - props.rest_strain.kappa;
    let dn = v.nu - props.rest_strain.nu;
    dk.component_mul(&props.stiffness_angular).dot(&dk)
        + dn.component_mul(&props.stiffness_linear).dot(&dn)
}

/// Linear-elastic energy
/// `U = 1/2 * int (k - k0)^T B_k (k - k0) + (n - n0)^T B_n (n - n0) ds`
/// by the trapezoid rule on the field's grid.
pub fn potential_energy(field: &StrainField, props: &RodProperties) -> f64 {
    let w = trapezoid_weights(field.grid());
    0.5 * field
        .values()
        .iter()
        .zip(&w)
        .map(|(v, wk)| wk * energy_density(v, props))
        .sum::<f64>()
}

/// `Phi = sum_m pose_mismatch(q(s_m), q^(m))`.
pub fn mismatch_cost(
    field: &StrainField,
    poses: &[Pose],
    meas: &MeasurementSet,
    length: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for m in meas.markers() {
        let q = interpolate_pose(field, poses, m.s)?;
        total += crate::geom::pose_mismatch(&q, &m.pose, length);
    }
    Ok(total)
}

/// `J = U + (eta / 2) * Phi` after one kinematic integration.
pub fn objective(
    field: &StrainField,
    base: &Pose,
    meas: &MeasurementSet,
    props: &RodProperties,
    eta: f64,
) -> Result<f64> {
    let poses = integrate_kinematics(field, base)?;
    let phi = mismatch_cost(field, &poses, meas, props.length)?;
    Ok(potential_energy(field, props) + 0.5 * eta * phi)
}

/// Value and pieces of the objective at one strain field.
#[derive(Clone, Debug)]
pub struct ObjectiveEval {
    pub energy: f64,
    pub mismatch: f64,
    pub value: f64,
    /// dJ/d(node strain), ordered `[kappa, nu]` per node.
    pub gradient: Vec<[f64; 6]>,
}

/// Exact gradient of the discretized objective with respect to every node
/// strain.
pub fn objective_gradient(
    field: &StrainField,
    base: &Pose,
    meas: &MeasurementSet,
    props: &RodProperties,
    eta: f64,
) -> Result<Vec<[f64; 6]>> {
    Ok(evaluate(field, base, meas, props, eta)?.gradient)
}

/// Objective value and gradient in one forward/reverse sweep.
pub fn evaluate(
    field: &StrainField,
    base: &Pose,
    meas: &MeasurementSet,
    props: &RodProperties,
    eta: f64,
) -> Result<ObjectiveEval> {
    let chain = Chain::integrate(field, base)?;
    let grid = field.grid();
    let n = grid.len();
    let length = props.length;

    // Elastic part.
    let weights = trapezoid_weights(grid);
    let mut gradient = vec![[0.0; 6]; n];
    let mut energy = 0.0;
    for (k, v) in field.values().iter().enumerate() {
        energy += 0.5 * weights[k] * energy_density(v, props);
        let gk = (v.kappa - props.rest_strain.kappa).component_mul(&props.stiffness_angular) * weights[k];
        let gn = (v.nu - props.rest_strain.nu).component_mul(&props.stiffness_linear) * weights[k];
        gradient[k] = [gk.x, gk.y, gk.z, gn.x, gn.y, gn.z];
    }

    // Mismatch part: seed pose gradients at the markers.
    let scale = 0.5 * eta;
    let inv_l2 = 1.0 / (length * length);
    let mut grad_rot = vec![Mat3::zeros(); n];
    let mut grad_pos = vec![Vec3::zeros(); n];
    // Gradient with respect to each segment's (kappa, nu).
    let mut seg_grad = vec![(Vec3::zeros(), Vec3::zeros()); n - 1];
    let mut mismatch = 0.0;

    for m in meas.markers() {
        let target_rot = m.pose.rotation.matrix();
        match locate(grid, m.s)? {
            Site::Node(k) => {
                let dq = chain.rots[k] - target_rot;
                let dx = chain.positions[k] - m.pose.position;
                mismatch += dx.norm_squared() * inv_l2 + dq.norm_squared() / 8.0;
                grad_rot[k] += dq * (scale * 0.25);
                grad_pos[k] += dx * (scale * 2.0 * inv_l2);
            }
            Site::Inside { segment, offset } => {
                let step = Step::new(&field.segment_strain(segment), offset);
                let r_k = chain.rots[segment];
                let rot = r_k * step.rot;
                let pos = r_k * step.pos + chain.positions[segment];
                let dq = rot - target_rot;
                let dx = pos - m.pose.position;
                mismatch += dx.norm_squared() * inv_l2 + dq.norm_squared() / 8.0;
                let g_rot = dq * (scale * 0.25);
                let g_pos = dx * (scale * 2.0 * inv_l2);
                grad_rot[segment] += g_rot * step.rot.transpose() + g_pos * step.pos.transpose();
                grad_pos[segment] += g_pos;
                let r_kt = r_k.transpose();
                let (g_phi, g_rho) =
                    exp_se3_pullback(&step.phi, &step.rho, &(r_kt * g_rot), &(r_kt * g_pos));
                seg_grad[segment].0 += g_phi * offset;
                seg_grad[segment].1 += g_rho * offset;
            }
        }
    }

    // Reverse sweep along the chain: pose_{k+1} = pose_k * step_k.
    for k in (0..n - 1).rev() {
        let (g_rot_next, g_pos_next) = (grad_rot[k + 1], grad_pos[k + 1]);
        let step = &chain.steps[k];
        grad_rot[k] += g_rot_next * step.rot.transpose() + g_pos_next * step.pos.transpose();
        grad_pos[k] += g_pos_next;
        let r_kt = chain.rots[k].transpose();
        let (g_phi, g_rho) =
            exp_se3_pullback(&step.phi, &step.rho, &(r_kt * g_rot_next), &(r_kt * g_pos_next));
        let h = grid[k + 1] - grid[k];
        seg_grad[k].0 += g_phi * h;
        seg_grad[k].1 += g_rho * h;
    }

    // Each segment strain is the mean of its two nodes.
    for (k, (gk, gn)) in seg_grad.iter().enumerate() {
        for i in 0..3 {
            gradient[k][i] += 0.5 * gk[i];
            gradient[k + 1][i] += 0.5 * gk[i];
            gradient[k][i + 3] += 0.5 * gn[i];
            gradient[k + 1][i + 3] += 0.5 * gn[i];
        }
    }

    Ok(ObjectiveEval {
        energy,
        mismatch,
        value: energy + scale * mismatch,
        gradient,
    })
}

/// Measurement set read off a posture at the given arc lengths, without noise.
pub fn measure(
    field: &StrainField,
    poses: &[Pose],
    arc_lengths: &[f64],
) -> Result<MeasurementSet> {
    let markers = arc_lengths
        .iter()
        .map(|&s| {
            Ok(Marker {
                s,
                pose: interpolate_pose(field, poses, s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(markers, field.length())
}

/// `count` evenly spaced marker positions, the last one at the tip.
pub fn even_marker_layout(length: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|m| {
            if m == count {
                length
            } else {
                length * m as f64 / count as f64
            }
        })
        .collect()
}
