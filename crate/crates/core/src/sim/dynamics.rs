use super::SimError;
use nalgebra::{DMatrix, Matrix3, Quaternion, SVector, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Error-state dimension: position, Rodrigues parameters, velocity, body rates.
pub const NZ: usize = 12;
pub const NU: usize = 4;

/// Nominal parameters of a 29 g nano-quadrotor in X configuration.
///
/// Motor `i` produces thrust `thrust_coeff * u_m[i]` along body z and a yaw
/// torque of `torque_coeff * u_m[i]` with alternating sign. Motors are
/// numbered front-right, back-right, back-left, front-left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadParams {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub arm_length: f64,
    /// Thrust at full command [N].
    pub thrust_coeff: f64,
    /// Yaw torque at full command [N m].
    pub torque_coeff: f64,
    pub gravity: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        let thrust = 0.15;
        Self {
            mass: 0.029,
            inertia: [1.66e-5, 1.66e-5, 2.93e-5],
            arm_length: 0.046,
            thrust_coeff: thrust,
            torque_coeff: thrust * 0.005964552,
            gravity: 9.81,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let all = [
            self.mass,
            self.inertia[0],
            self.inertia[1],
            self.inertia[2],
            self.arm_length,
            self.thrust_coeff,
            self.torque_coeff,
            self.gravity,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(SimError::InvalidParams(
                "all parameters must be positive".into(),
            ));
        }
        if self.hover_command() >= 1.0 {
            return Err(SimError::InvalidParams(
                "motors cannot lift the vehicle".into(),
            ));
        }
        Ok(())
    }

    /// Per-motor command at which total thrust equals weight.
    pub fn hover_command(&self) -> f64 {
        self.mass * self.gravity / (4.0 * self.thrust_coeff)
    }

    pub fn u0(&self) -> Vector4<f64> {
        Vector4::repeat(self.hover_command())
    }

    /// Maps motor commands to (total thrust, body torque).
    pub fn wrench(&self, u_m: &Vector4<f64>) -> (f64, Vector3<f64>) {
        let t = u_m * self.thrust_coeff;
        let l = self.arm_length / std::f64::consts::SQRT_2;
        let torque = Vector3::new(
            l * (-t[0] - t[1] + t[2] + t[3]),
            l * (-t[0] + t[1] + t[2] - t[3]),
            self.torque_coeff * (-u_m[0] + u_m[1] - u_m[2] + u_m[3]),
        );
        (t.sum(), torque)
    }

    fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.inertia))
    }
}

/// Full rigid-body state. Velocity is in the world frame, body rates in
/// the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub q: UnitQuaternion<f64>,
    pub omega: Vector3<f64>,
}

impl QuadState {
    pub fn hover_at(p: Vector3<f64>) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            q: UnitQuaternion::identity(),
            omega: Vector3::zeros(),
        }
    }

    /// `[p, q(w, x, y, z), v, omega]`.
    pub fn to_array(&self) -> [f64; 13] {
        let q = self.q.quaternion();
        [
            self.p.x,
            self.p.y,
            self.p.z,
            q.w,
            q.i,
            q.j,
            q.k,
            self.v.x,
            self.v.y,
            self.v.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
        ]
    }

    fn pack(&self) -> SVector<f64, 13> {
        SVector::from(self.to_array())
    }

    fn unpack(x: &SVector<f64, 13>) -> Self {
        Self {
            p: Vector3::new(x[0], x[1], x[2]),
            q: UnitQuaternion::from_quaternion(Quaternion::new(x[3], x[4], x[5], x[6])),
            v: Vector3::new(x[7], x[8], x[9]),
            omega: Vector3::new(x[10], x[11], x[12]),
        }
    }

    /// Error state `[p, r, v, omega] - reference` with `r` the Rodrigues
    /// parameters of the attitude.
    pub fn error_state(&self, reference: &SVector<f64, NZ>) -> Result<SVector<f64, NZ>, SimError> {
        let r = quaternion_to_rodrigues(&self.q)?;
        let mut z = SVector::<f64, NZ>::zeros();
        z.fixed_rows_mut::<3>(0).copy_from(&self.p);
        z.fixed_rows_mut::<3>(3).copy_from(&r);
        z.fixed_rows_mut::<3>(6).copy_from(&self.v);
        z.fixed_rows_mut::<3>(9).copy_from(&self.omega);
        Ok(z - reference)
    }

    /// Inverse of [`error_state`](Self::error_state) around `reference`.
    pub fn from_error_state(z: &SVector<f64, NZ>, reference: &SVector<f64, NZ>) -> Self {
        let s = z + reference;
        Self {
            p: s.fixed_rows::<3>(0).into_owned(),
            q: rodrigues_to_quaternion(&s.fixed_rows::<3>(3).into_owned()),
            v: s.fixed_rows::<3>(6).into_owned(),
            omega: s.fixed_rows::<3>(9).into_owned(),
        }
    }
}

pub fn quaternion_to_rodrigues(q: &UnitQuaternion<f64>) -> Result<Vector3<f64>, SimError> {
    let w = q.w;
    if w.abs() < 1e-6 {
        return Err(SimError::NearSingularAttitude(w));
    }
    Ok(q.vector() / w)
}

pub fn rodrigues_to_quaternion(r: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(1.0, r.x, r.y, r.z))
}

/// `u_m = clamp(u0 + u, 0, 1)` and whether any entry was clamped.
pub fn motor_map(u: &Vector4<f64>, u0: &Vector4<f64>) -> (Vector4<f64>, bool) {
    let raw = u0 + u;
    let um = raw.map(|v| v.clamp(0.0, 1.0));
    (um, um != raw)
}

fn derivative(x: &SVector<f64, 13>, u_m: &Vector4<f64>, params: &QuadParams) -> SVector<f64, 13> {
    let q = Quaternion::new(x[3], x[4], x[5], x[6]);
    let v = Vector3::new(x[7], x[8], x[9]);
    let omega = Vector3::new(x[10], x[11], x[12]);
    let (thrust, torque) = params.wrench(u_m);
    // Rotation of the (not necessarily unit) quaternion, normalized.
    let rot = UnitQuaternion::from_quaternion(q);
    let acc =
        rot * Vector3::new(0.0, 0.0, thrust / params.mass) - Vector3::new(0.0, 0.0, params.gravity);
    let qdot = q * Quaternion::new(0.0, omega.x, omega.y, omega.z) * 0.5;
    let j = params.inertia_matrix();
    let jw = j * omega;
    let wdot = Vector3::new(
        (torque.x - omega.cross(&jw).x) / params.inertia[0],
        (torque.y - omega.cross(&jw).y) / params.inertia[1],
        (torque.z - omega.cross(&jw).z) / params.inertia[2],
    );
    let mut d = SVector::<f64, 13>::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&v);
    d[3] = qdot.w;
    d[4] = qdot.i;
    d[5] = qdot.j;
    d[6] = qdot.k;
    d.fixed_rows_mut::<3>(7).copy_from(&acc);
    d.fixed_rows_mut::<3>(10).copy_from(&wdot);
    d
}

/// One RK4 step of the rigid-body dynamics. Commands outside `[0, 1]` are
/// clamped; the flag reports whether that happened.
pub fn dynamics_step(
    state: &QuadState,
    u_m: &Vector4<f64>,
    params: &QuadParams,
    dt: f64,
) -> (QuadState, bool) {
    let um = u_m.map(|v| v.clamp(0.0, 1.0));
    let clamped = um != *u_m;
    let x = state.pack();
    let k1 = derivative(&x, &um, params);
    let k2 = derivative(&(x + k1 * (dt / 2.0)), &um, params);
    let k3 = derivative(&(x + k2 * (dt / 2.0)), &um, params);
    let k4 = derivative(&(x + k3 * dt), &um, params);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    (QuadState::unpack(&next), clamped)
}

/// Continuous-time Jacobians at hover in error coordinates.
fn hover_jacobians(params: &QuadParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let g = params.gravity;
    let mut a = DMatrix::zeros(NZ, NZ);
    for k in 0..3 {
        a[(k, 6 + k)] = 1.0;
        a[(3 + k, 9 + k)] = 0.5;
    }
    // Small tilt: R e3 ~ e3 + 2 (r_y, -r_x, 0).
    a[(6, 4)] = 2.0 * g;
    a[(7, 3)] = -2.0 * g;
    let mut b = DMatrix::zeros(NZ, NU);
    let l = params.arm_length / std::f64::consts::SQRT_2 * params.thrust_coeff;
    let kt = params.thrust_coeff;
    let km = params.torque_coeff;
    let roll = [-l, -l, l, l];
    let pitch = [-l, l, l, -l];
    let yaw = [-km, km, -km, km];
    for i in 0..NU {
        b[(8, i)] = kt / params.mass;
        b[(9, i)] = roll[i] / params.inertia[0];
        b[(10, i)] = pitch[i] / params.inertia[1];
        b[(11, i)] = yaw[i] / params.inertia[2];
    }
    (a, b)
}

/// Zero-order-hold discretization of the hover linearization in the
/// 12-state error coordinates `[p, r, v, omega]`.
pub fn linearize_hover(params: &QuadParams, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a, b) = hover_jacobians(params);
    let mut aug = DMatrix::zeros(NZ + NU, NZ + NU);
    aug.view_mut((0, 0), (NZ, NZ)).copy_from(&(a * dt));
    aug.view_mut((0, NZ), (NZ, NU)).copy_from(&(b * dt));
    let e = aug.exp();
    (
        e.view((0, 0), (NZ, NZ)).into_owned(),
        e.view((0, NZ), (NZ, NU)).into_owned(),
    )
}
