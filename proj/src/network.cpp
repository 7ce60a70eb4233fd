#include "driftnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "driftnet/errors.hpp"
#include "driftnet/json_io.hpp"
#include "driftnet/simulate.hpp"

namespace driftnet {

ReluNetwork::ReluNetwork(std::vector<Matrix> weights, std::vector<Vector> shifts)
    : weights_(std::move(weights)), shifts_(std::move(shifts)) {
    if (weights_.empty()) throw ValidationError("ReluNetwork: need at least one weight matrix");
    if (shifts_.size() + 1 != weights_.size()) {
        throw ValidationError("ReluNetwork: expected one shift vector per hidden layer (L shifts for L+1 weights)");
    }
    widths_.push_back(static_cast<std::size_t>(weights_[0].cols()));
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const Matrix& w = weights_[l];
        if (static_cast<std::size_t>(w.cols()) != widths_.back() || w.rows() == 0 || w.cols() == 0) {
            std::ostringstream os;
            os << "ReluNetwork: W_" << l << " is " << w.rows() << "x" << w.cols() << ", expected "
               << widths_.back() << " columns";
            throw ValidationError(os.str());
        }
        widths_.push_back(static_cast<std::size_t>(w.rows()));
        if (l < shifts_.size() && static_cast<std::size_t>(shifts_[l].size()) != widths_.back()) {
            std::ostringstream os;
            os << "ReluNetwork: v_" << (l + 1) << " has length " << shifts_[l].size() << ", expected "
               << widths_.back();
            throw ValidationError(os.str());
        }
    }
}

ReluNetwork ReluNetwork::zeros(const std::vector<std::size_t>& widths) {
    if (widths.size() < 2) throw ValidationError("ReluNetwork::zeros: need at least input and output widths");
    std::vector<Matrix> w;
    std::vector<Vector> v;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        w.push_back(Matrix::Zero(static_cast<Eigen::Index>(widths[l + 1]), static_cast<Eigen::Index>(widths[l])));
        if (l + 2 < widths.size()) v.push_back(Vector::Zero(static_cast<Eigen::Index>(widths[l + 1])));
    }
    return ReluNetwork(std::move(w), std::move(v));
}

std::size_t ReluNetwork::max_width() const noexcept { return *std::max_element(widths_.begin(), widths_.end()); }

Vector ReluNetwork::forward(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
        throw ValidationError("ReluNetwork::forward: input has the wrong dimension");
    }
    Vector h = weights_[0] * x;
    for (std::size_t l = 1; l < weights_.size(); ++l) {
        h = weights_[l] * (h - shifts_[l - 1]).cwiseMax(0.0);
    }
    return h;
}

Vector ReluNetwork::forward_clipped(const Vector& x) const {
    if (!in_unit_box({x.data(), static_cast<std::size_t>(x.size())})) {
        return Vector::Zero(static_cast<Eigen::Index>(output_dim()));
    }
    return forward(x);
}

Matrix ReluNetwork::forward_batch(const Matrix& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
        throw ValidationError("ReluNetwork::forward_batch: inputs must have input_dim rows");
    }
    Matrix h = weights_[0] * inputs;
    for (std::size_t l = 1; l < weights_.size(); ++l) {
        h = weights_[l] * (h.colwise() - shifts_[l - 1]).cwiseMax(0.0);
    }
    return h;
}

bool ReluNetwork::operator==(const ReluNetwork& other) const {
    if (widths_ != other.widths_) return false;
    for (std::size_t l = 0; l < weights_.size(); ++l)
        if (weights_[l] != other.weights_[l]) return false;
    for (std::size_t l = 0; l < shifts_.size(); ++l)
        if (shifts_[l] != other.shifts_[l]) return false;
    return true;
}

NetworkGradients NetworkGradients::zeros_like(const ReluNetwork& net) {
    NetworkGradients g;
    for (const auto& w : net.weights()) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& v : net.shifts()) g.shifts.push_back(Vector::Zero(v.size()));
    return g;
}

NetworkGradients backward(const ReluNetwork& net, const Matrix& inputs, const Matrix& output_gradients) {
    if (inputs.cols() == 0) throw ValidationError("backward: empty batch");
    if (static_cast<std::size_t>(inputs.rows()) != net.input_dim() ||
        static_cast<std::size_t>(output_gradients.rows()) != net.output_dim() ||
        output_gradients.cols() != inputs.cols()) {
        throw ValidationError("backward: batch shapes do not match the network");
    }
    const std::size_t layers = net.weights().size();

    // activations[l] feeds W_l; pre[l] = activation input minus shift (l >= 1)
    std::vector<Matrix> activations(layers);
    std::vector<Matrix> shifted(layers);
    activations[0] = inputs;
    Matrix h = net.weight(0) * inputs;
    for (std::size_t l = 1; l < layers; ++l) {
        shifted[l] = h.colwise() - net.shift(l);
        activations[l] = shifted[l].cwiseMax(0.0);
        h = net.weight(l) * activations[l];
    }

    NetworkGradients grads;
    grads.weights.resize(layers);
    grads.shifts.resize(layers - 1);
    Matrix delta = output_gradients;
    for (std::size_t l = layers; l-- > 0;) {
        grads.weights[l] = delta * activations[l].transpose();
        if (l == 0) break;
        Matrix upstream = net.weight(l).transpose() * delta;
        delta = (shifted[l].array() > 0.0).select(upstream, 0.0);
        grads.shifts[l - 1] = -delta.rowwise().sum();
    }
    return grads;
}

std::size_t sparsity(const ReluNetwork& net) {
    std::size_t count = 0;
    for (const auto& w : net.weights()) count += static_cast<std::size_t>((w.array() != 0.0).count());
    for (const auto& v : net.shifts()) count += static_cast<std::size_t>((v.array() != 0.0).count());
    return count;
}

double max_weight(const ReluNetwork& net) {
    double b = 0.0;
    for (const auto& w : net.weights()) b = std::max(b, w.cwiseAbs().maxCoeff());
    for (const auto& v : net.shifts())
        if (v.size() > 0) b = std::max(b, v.cwiseAbs().maxCoeff());
    return b;
}

double interval_sup_bound(const ReluNetwork& net) {
    Vector lo = Vector::Zero(static_cast<Eigen::Index>(net.input_dim()));
    Vector hi = Vector::Ones(static_cast<Eigen::Index>(net.input_dim()));
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        if (l > 0) {
            lo = (lo - net.shift(l)).cwiseMax(0.0);
            hi = (hi - net.shift(l)).cwiseMax(0.0);
        }
        const Matrix& w = net.weight(l);
        const Matrix pos = w.cwiseMax(0.0);
        const Matrix neg = w.cwiseMin(0.0);
        Vector new_lo = pos * lo + neg * hi;
        Vector new_hi = pos * hi + neg * lo;
        lo = std::move(new_lo);
        hi = std::move(new_hi);
    }
    return std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff());
}

double norm_sup_bound(const ReluNetwork& net) {
    double a = std::sqrt(static_cast<double>(net.input_dim()));
    const std::size_t last = net.weights().size() - 1;
    for (std::size_t l = 0; l < last; ++l) {
        a = net.weight(l).norm() * a + net.shift(l + 1).norm();
    }
    return net.weight(last).rowwise().norm().maxCoeff() * a;
}

double sup_bound(const ReluNetwork& net) { return std::min(interval_sup_bound(net), norm_sup_bound(net)); }

ClassCertificate certify(const ReluNetwork& net) {
    ClassCertificate cert;
    cert.depth = net.depth();
    cert.widths = net.widths();
    cert.sparsity = sparsity(net);
    cert.max_weight = max_weight(net);
    cert.sup_bound = sup_bound(net);
    cert.member_of_unit_class = cert.max_weight <= 1.0;
    return cert;
}

ConversionLimits conversion_limits(const ReluNetwork& original, std::size_t converted_depth) {
    const double b = max_weight(original);
    const double depth = static_cast<double>(original.depth());
    ConversionLimits limits;
    limits.depth = b > 1.0 ? static_cast<std::size_t>(std::ceil((std::log(b) + 5.0) * depth))
                           : original.depth();
    limits.width = std::max<std::size_t>(3, original.max_width());
    limits.sparsity = 2 * sparsity(original) + 12 * converted_depth;
    return limits;
}

namespace {

// Output reconstruction appended after the rescaled trunk. `duplicate_split`
// folds the fan-out into the split layer (one layer shallower, more nonzeros).
ReluNetwork build_unit_network(const std::vector<Matrix>& trunk_weights, const std::vector<Vector>& trunk_shifts,
                               const Matrix& scaled_output, int doublings, bool duplicate_split) {
    const Eigen::Index q = scaled_output.rows();
    std::vector<Matrix> w = trunk_weights;
    std::vector<Vector> v = trunk_shifts;

    const Matrix eye = Matrix::Identity(q, q);
    if (duplicate_split) {
        Matrix split(4 * q, scaled_output.cols());
        split << scaled_output, scaled_output, -scaled_output, -scaled_output;
        w.push_back(split);
        v.push_back(Vector::Zero(4 * q));
    } else {
        Matrix split(2 * q, scaled_output.cols());
        split << scaled_output, -scaled_output;
        w.push_back(split);
        v.push_back(Vector::Zero(2 * q));

        // (u, w) -> (u, u, w, w)
        Matrix fan = Matrix::Zero(4 * q, 2 * q);
        fan.block(0, 0, q, q) = eye;
        fan.block(q, 0, q, q) = eye;
        fan.block(2 * q, q, q, q) = eye;
        fan.block(3 * q, q, q, q) = eye;
        w.push_back(fan);
        v.push_back(Vector::Zero(4 * q));
    }

    // (u1, u2, w1, w2) -> (u1 + u2, u1 + u2, w1 + w2, w1 + w2)
    Matrix dbl = Matrix::Zero(4 * q, 4 * q);
    for (Eigen::Index c = 0; c < 2; ++c) {
        dbl.block(c * q, 0, q, q) = eye;
        dbl.block(c * q, q, q, q) = eye;
        dbl.block(2 * q + c * q, 2 * q, q, q) = eye;
        dbl.block(2 * q + c * q, 3 * q, q, q) = eye;
    }
    for (int i = 0; i < doublings - 1; ++i) {
        w.push_back(dbl);
        v.push_back(Vector::Zero(4 * q));
    }

    // out = u1 + u2 - w1 - w2
    Matrix out(q, 4 * q);
    out << eye, eye, -eye, -eye;
    w.push_back(out);
    return ReluNetwork(std::move(w), std::move(v));
}

} // namespace

Conversion convert_to_unit_weights(const ReluNetwork& net) {
    const double b = max_weight(net);
    if (!std::isfinite(b)) throw ValidationError("convert_to_unit_weights: network has non-finite parameters");
    if (b <= 1.0) return {net, certify(net)};

    const std::size_t layers = net.weights().size();
    std::vector<double> lambda(layers, 1.0);
    double cumulative = 1.0;
    for (std::size_t l = 0; l < layers; ++l) {
        double need = std::max(1.0, net.weight(l).cwiseAbs().maxCoeff());
        if (l + 1 < layers && net.shift(l + 1).size() > 0) {
            need = std::max(need, net.shift(l + 1).cwiseAbs().maxCoeff() / cumulative);
        }
        lambda[l] = need;
        cumulative *= need;
    }
    int doublings = static_cast<int>(std::ceil(std::log2(cumulative)));
    while (doublings > 0 && std::ldexp(1.0, doublings - 1) >= cumulative) --doublings;
    while (std::ldexp(1.0, doublings) < cumulative) ++doublings;
    doublings = std::max(doublings, 1);
    lambda[0] *= std::ldexp(1.0, doublings) / cumulative;

    std::vector<Matrix> trunk_w;
    std::vector<Vector> trunk_v;
    cumulative = 1.0;
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        trunk_w.push_back(net.weight(l) / lambda[l]);
        cumulative *= lambda[l];
        trunk_v.push_back(net.shift(l + 1) / cumulative);
    }
    const Matrix scaled_output = net.weight(layers - 1) / lambda[layers - 1];

    ReluNetwork compact = build_unit_network(trunk_w, trunk_v, scaled_output, doublings, true);
    ReluNetwork narrow = build_unit_network(trunk_w, trunk_v, scaled_output, doublings, false);
    const ConversionLimits compact_limits = conversion_limits(net, compact.depth());
    ReluNetwork chosen = sparsity(compact) <= compact_limits.sparsity ? std::move(compact) : std::move(narrow);
    ClassCertificate cert = certify(chosen);
    return {std::move(chosen), std::move(cert)};
}

std::pair<ReluNetwork, ReluNetwork> split_heads(const ReluNetwork& net) {
    if (net.output_dim() != 2) throw ValidationError("split_heads: network must have exactly two outputs");
    const std::size_t last = net.weights().size() - 1;
    auto head = [&](Eigen::Index row) {
        std::vector<Matrix> w(net.weights().begin(), net.weights().end() - 1);
        w.push_back(net.weight(last).row(row));
        return ReluNetwork(std::move(w), net.shifts());
    };
    return {head(0), head(1)};
}

// ---------------------------------------------------------------------------
// Serialisation

nlohmann::json to_json(const ReluNetwork& net) {
    nlohmann::json doc;
    doc["widths"] = net.widths();
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : net.weights()) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(w.cols()));
            for (Eigen::Index j = 0; j < w.cols(); ++j) row[static_cast<std::size_t>(j)] = w(i, j);
            rows.push_back(row);
        }
        weights.push_back(rows);
    }
    doc["weights"] = weights;
    nlohmann::json shifts = nlohmann::json::array();
    for (const auto& v : net.shifts()) shifts.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    doc["shifts"] = shifts;
    return doc;
}

ReluNetwork network_from_json(const nlohmann::json& doc) {
    auto fail = [](const std::string& what) { throw ParseError("network document: " + what); };
    if (!doc.is_object()) fail("top level must be an object");
    for (const auto& [key, value] : doc.items()) {
        if (key != "widths" && key != "weights" && key != "shifts") fail("unknown field '" + key + "'");
    }
    if (!doc.contains("weights") || !doc["weights"].is_array()) fail("field 'weights' must be an array");
    if (!doc.contains("shifts") || !doc["shifts"].is_array()) fail("field 'shifts' must be an array");

    std::vector<Matrix> weights;
    const auto& jw = doc["weights"];
    for (std::size_t l = 0; l < jw.size(); ++l) {
        const auto& rows = jw[l];
        const std::string where = "weights[" + std::to_string(l) + "]";
        if (!rows.is_array() || rows.empty() || !rows[0].is_array()) fail(where + " must be a nonempty array of rows");
        const std::size_t cols = rows[0].size();
        Matrix w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!rows[i].is_array() || rows[i].size() != cols) fail(where + " has ragged rows");
            for (std::size_t j = 0; j < cols; ++j) {
                if (!rows[i][j].is_number()) {
                    fail(where + "[" + std::to_string(i) + "][" + std::to_string(j) + "] is not a number");
                }
                w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
            }
        }
        weights.push_back(std::move(w));
    }
    std::vector<Vector> shifts;
    const auto& jv = doc["shifts"];
    for (std::size_t l = 0; l < jv.size(); ++l) {
        const std::string where = "shifts[" + std::to_string(l) + "]";
        if (!jv[l].is_array()) fail(where + " must be an array");
        Vector v(static_cast<Eigen::Index>(jv[l].size()));
        for (std::size_t i = 0; i < jv[l].size(); ++i) {
            if (!jv[l][i].is_number()) fail(where + "[" + std::to_string(i) + "] is not a number");
            v[static_cast<Eigen::Index>(i)] = jv[l][i].get<double>();
        }
        shifts.push_back(std::move(v));
    }
    try {
        ReluNetwork net(std::move(weights), std::move(shifts));
        if (doc.contains("widths")) {
            if (doc["widths"].get<std::vector<std::size_t>>() != net.widths()) {
                fail("field 'widths' does not match the weight shapes");
            }
        }
        return net;
    } catch (const ValidationError& e) {
        throw ParseError(std::string("network document: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("network document: ") + e.what());
    }
}

nlohmann::json to_json(const ClassCertificate& cert) {
    return nlohmann::json{{"depth", cert.depth},
                          {"widths", cert.widths},
                          {"sparsity", cert.sparsity},
                          {"max_weight", cert.max_weight},
                          {"sup_bound", cert.sup_bound},
                          {"member_of_unit_class", cert.member_of_unit_class},
                          {"log_base", cert.log_base}};
}

void save_network(const std::string& path, const ReluNetwork& net) { write_json_file(path, to_json(net)); }

ReluNetwork load_network(const std::string& path) {
    try {
        return network_from_json(read_json_file(path));
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        if (msg.rfind(path, 0) == 0) throw;
        throw ParseError(path + ": " + msg);
    }
}

} // namespace driftnet
