#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "driftnet/linalg.hpp"

namespace driftnet {

/// Feed-forward ReLU network
///
///   f(x) = W_L rho_{v_L} W_{L-1} ... W_1 rho_{v_1} W_0 x,   rho_v(y)_i = max(0, y_i - v_i).
///
/// The shift v_l sits inside the activation that feeds W_l; there is no
/// shift after the output layer. widths = (p_0, ..., p_{L+1}), W_l is
/// p_{l+1} x p_l and v_l has length p_l.
class ReluNetwork {
public:
    /// Validates the shape chain; throws ValidationError on mismatch.
    ReluNetwork(std::vector<Matrix> weights, std::vector<Vector> shifts);

    static ReluNetwork zeros(const std::vector<std::size_t>& widths);

    /// Number of hidden activation layers L.
    std::size_t depth() const noexcept { return shifts_.size(); }
    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t input_dim() const noexcept { return widths_.front(); }
    std::size_t output_dim() const noexcept { return widths_.back(); }
    std::size_t max_width() const noexcept;

    const std::vector<Matrix>& weights() const noexcept { return weights_; }
    const std::vector<Vector>& shifts() const noexcept { return shifts_; }
    const Matrix& weight(std::size_t l) const { return weights_.at(l); }
    /// Shift v_l for l = 1..L.
    const Vector& shift(std::size_t l) const { return shifts_.at(l - 1); }

    /// Mutable parameter access for optimisers. Callers must keep shapes.
    Matrix& weight(std::size_t l) { return weights_.at(l); }
    Vector& shift(std::size_t l) { return shifts_.at(l - 1); }

    Vector forward(const Vector& x) const;
    /// forward(x) on the closed box [0,1]^d, zero elsewhere.
    Vector forward_clipped(const Vector& x) const;
    /// Column-batched forward: inputs is d x n, result is p_{L+1} x n.
    Matrix forward_batch(const Matrix& inputs) const;

    bool operator==(const ReluNetwork& other) const;

private:
    std::vector<Matrix> weights_;
    std::vector<Vector> shifts_;
    std::vector<std::size_t> widths_;
};

/// Parameter-shaped container used for gradients and optimiser state.
struct NetworkGradients {
    std::vector<Matrix> weights;
    std::vector<Vector> shifts;

    static NetworkGradients zeros_like(const ReluNetwork& net);
};

/// Reverse-mode gradient of sum_n <output_gradients[:, n], f(inputs[:, n])>
/// with respect to every W_l and v_l. The ReLU derivative at the kink is 0.
NetworkGradients backward(const ReluNetwork& net, const Matrix& inputs, const Matrix& output_gradients);

/// Number of nonzero entries over all W_l and v_l.
std::size_t sparsity(const ReluNetwork& net);
/// Largest absolute entry over all W_l and v_l.
double max_weight(const ReluNetwork& net);

/// Sound bound F >= |f(x)_i| for every x in [0,1]^d and every output i.
///
/// Two bounds are computed and the smaller one returned:
///  * interval propagation of the box [0,1]^d through each affine map and
///    the monotone shifted ReLU;
///  * the norm recursion a_0 = sqrt(d), a_{l+1} = |W_l|_F a_l + |v_{l+1}|_2,
///    F = max_j |row_j(W_L)|_2 a_L, which only depends on norm bounds of the
///    parameters (see norm_sup_bound).
double sup_bound(const ReluNetwork& net);
double interval_sup_bound(const ReluNetwork& net);
double norm_sup_bound(const ReluNetwork& net);

/// Complexity summary of a network for the sparse bounded-weight class.
struct ClassCertificate {
    std::size_t depth = 0;
    std::vector<std::size_t> widths;
    std::size_t sparsity = 0;
    double max_weight = 0.0;
    double sup_bound = 0.0;
    bool member_of_unit_class = false;
    /// Base of the logarithm used in the conversion depth bound.
    std::string log_base = "natural";
};

ClassCertificate certify(const ReluNetwork& net);

/// Complexity limits promised for the unit-weight conversion of a network
/// with depth L, max weight B, max width p and sparsity s:
/// depth <= ceil((ln B + 5) L), width <= max{3, p}, sparsity <= 2 s + 12 depth.
struct ConversionLimits {
    std::size_t depth = 0;
    std::size_t width = 0;
    std::size_t sparsity = 0;
};

/// Limits for `original`; the sparsity limit uses `converted_depth` for L'.
ConversionLimits conversion_limits(const ReluNetwork& original, std::size_t converted_depth);

struct Conversion {
    ReluNetwork network;
    ClassCertificate certificate;
};

/// Rewrites a network with weights bounded by B into an equivalent one with
/// weights bounded by 1 (same function on all of R^d).
///
/// Weights of layer l are divided by lambda_l >= 1 and shifts v_l by the
/// cumulative product Lambda_{l-1}; by positive homogeneity of the shifted
/// ReLU the hidden activations become a_l / Lambda_{l-1}. lambda_0 is raised
/// so that Lambda_L = 2^k, and the output is rebuilt with k doubling steps:
/// a split layer emits (rho(y), rho(-y)), a fan-out layer copies each half
/// twice, and every following layer sums two copies (factor 2, unit weights).
/// Networks with B <= 1 are returned unchanged.
Conversion convert_to_unit_weights(const ReluNetwork& net);

/// Two single-output networks sharing copies of the trunk, each keeping one
/// row of W_L. Requires output_dim() == 2.
std::pair<ReluNetwork, ReluNetwork> split_heads(const ReluNetwork& net);

/// JSON document {"widths": [...], "weights": [[[row]...]...], "shifts": [[...]...]}.
nlohmann::json to_json(const ReluNetwork& net);
ReluNetwork network_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ClassCertificate& cert);

void save_network(const std::string& path, const ReluNetwork& net);
/// Throws ParseError with position context on malformed input.
ReluNetwork load_network(const std::string& path);

} // namespace driftnet
