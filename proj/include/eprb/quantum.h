// Copyright 2026 The eprb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EPRB_QUANTUM_H
#define EPRB_QUANTUM_H

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>

namespace eprb {

using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-12;
inline constexpr double kEigenvalueFloor = -1e-10;
inline constexpr double kProjectorTolerance = 1e-10;

/// Flat index of a single-observer channel: (setting, result) -> 2*setting + result.
constexpr int single_index(int setting, int result) {
    return 2 * setting + result;
}

/// Flat index of a coincidence channel in lexicographic ijkl order.
constexpr int coincidence_index(int i, int j, int k, int l) {
    return 8 * i + 4 * j + 2 * k + l;
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived> &m, double tol = kHermitianTolerance) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

const Matrix2c &pauli_identity();
const Matrix2c &pauli_x();
const Matrix2c &pauli_y();
const Matrix2c &pauli_z();

/// Unit 3-vector naming a projective spin measurement axis.
class MeasurementDirection {
   public:
    /// Throws InvalidInput unless |v| = 1 within 1e-12.
    explicit MeasurementDirection(const Eigen::Vector3d &v);
    MeasurementDirection(double x, double y, double z) : MeasurementDirection(Eigen::Vector3d(x, y, z)) {
    }

    const Eigen::Vector3d &vector() const {
        return v_;
    }

   private:
    Eigen::Vector3d v_;
};

/// Result-0 and result-1 effects of a measurement along a direction.
struct ProjectorPair {
    Matrix2c result0;
    Matrix2c result1;
};

/// Returns (1/2)(I + n.sigma) and (1/2)(I - n.sigma).
ProjectorPair measurement_operators(const MeasurementDirection &direction);

/// Alice's and Bob's measurement effects for one experiment, indexed
/// [setting][result]. Alice's axes lie in the x-z plane at theta and
/// theta - pi/2; Bob's are fixed at (0,0,1) and (-1,0,0).
struct ExperimentGeometry {
    double theta = 0.0;
    std::array<std::array<Matrix2c, 2>, 2> alice;
    std::array<std::array<Matrix2c, 2>, 2> bob;
};

ExperimentGeometry geometry_for_experiment(double theta);
Eigen::Vector3d alice_axis(double theta, int setting);
Eigen::Vector3d bob_axis(int setting);

/// A validated two-qubit state: Hermitian, unit trace, positive semidefinite.
/// Alice's qubit is the first tensor factor.
class DensityMatrix {
   public:
    /// Validates and throws InvalidInput on any violated invariant.
    static DensityMatrix from_matrix(const Matrix4c &m);

    /// Describes the first violated invariant, or nullopt if m is a valid state.
    static std::optional<std::string> check(const Matrix4c &m);

    const Matrix4c &matrix() const {
        return m_;
    }
    /// Ascending eigenvalues.
    Eigen::Vector4d eigenvalues() const;

   private:
    explicit DensityMatrix(const Matrix4c &m) : m_(m) {
    }
    friend DensityMatrix decode_factor(const Matrix4c &factor);

    Matrix4c m_;
};

/// 16 reals: the real diagonal of a lower-triangular factor L followed by
/// the (re, im) parts of its strictly-lower entries in row-major order
/// (1,0) (2,0) (2,1) (3,0) (3,1) (3,2).
using DensityParams = std::array<double, 16>;

Matrix4c density_factor(const DensityParams &params);
/// L L^dagger / Tr(L L^dagger). Throws DegenerateInput for a zero factor.
DensityMatrix decode_factor(const Matrix4c &factor);
DensityMatrix decode_density(const DensityParams &params);
/// Inverse of decode_density up to the overall scale (which is fixed to
/// Tr(L L^dagger) = 1). Rank-deficient states are handled by zeroing the
/// corresponding factor columns.
DensityParams encode_density(const DensityMatrix &rho);

DensityMatrix singlet_state();
DensityMatrix maximally_mixed_state();
/// weight * a + (1 - weight) * b for weight in [0, 1].
DensityMatrix mix_states(const DensityMatrix &a, const DensityMatrix &b, double weight);

/// Half the trace norm of the difference.
double trace_distance(const DensityMatrix &a, const DensityMatrix &b);

/// Expectation Tr((P_a x P_b) rho) for Pauli indices 0=I, 1=x, 2=y, 3=z.
double pauli_component(const DensityMatrix &rho, int alice_pauli, int bob_pauli);

/// When every measurement axis lies in the x-z plane (as in all
/// geometry_for_experiment outputs) the seven Pauli components containing
/// sigma_y never enter a probability, so a fit only determines the state
/// up to those directions. This returns a fixed representative of that
/// class: the real part of rho (which clears the six single-sigma_y
/// components and stays a valid state), with the sigma_y x sigma_y
/// component moved to the midpoint of its positive-semidefinite interval.
/// Every trace-rule probability of an x-z geometry is unchanged.
DensityMatrix fix_unobserved_components(const DensityMatrix &rho);

/// Trace-rule probabilities for one experiment. qa and qb use single_index,
/// qc uses coincidence_index.
struct QuantumProbs {
    std::array<double, 4> qa{};
    std::array<double, 4> qb{};
    std::array<double, 16> qc{};
};

/// Precomputed effect operators (A_ij x I, I x B_kl, A_ij x B_kl) for one
/// geometry so repeated trace-rule evaluation avoids rebuilding Kronecker
/// products.
class TraceRuleEvaluator {
   public:
    explicit TraceRuleEvaluator(const ExperimentGeometry &geometry);
    QuantumProbs evaluate(const Matrix4c &rho) const;

   private:
    std::array<Matrix4c, 4> alice_effects_;
    std::array<Matrix4c, 4> bob_effects_;
    std::array<Matrix4c, 16> joint_effects_;
};

QuantumProbs quantum_probs(const DensityMatrix &rho, const ExperimentGeometry &geometry);

Matrix4c kron(const Matrix2c &a, const Matrix2c &b);

}  // namespace eprb

#endif
