#pragma once

#include "gspinn/errors.hpp"
#include "gspinn/network.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

/// \file autodiff.hpp
///
/// Batched jet propagation through the MLP and reverse accumulation of
/// parameter gradients for losses built from the output jets.
///
/// A forward pass records a tape of layer operations (affine, tanh). Every
/// node stores its output for all tracked jet channels of all points; the
/// reverse sweep applies each node's jet-valued adjoint rule. Activations
/// are laid out as (width x C*N) matrices whose column blocks are the
/// channels value | d/dt | d/dx | d2/dx2 of the N points, so one GEMM per
/// layer moves every channel at once.

namespace gspinn {

using PointMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// K and the derivatives the residuals need.
struct KernelJet {
    double K = 0.0;
    double K_t = 0.0;
    double K_x = 0.0;
    double K_xx = 0.0;
};

enum class Channel : int { value = 0, t = 1, x = 2, xx = 3 };

/// Which jet channels a batch carries. The value channel is always present;
/// d2/dx2 needs d/dx.
struct ChannelSet {
    bool t = false;
    bool x = false;
    bool xx = false;

    static ChannelSet all() { return {true, true, true}; }
    static ChannelSet value_only() { return {}; }

    int count() const { return 1 + int(t) + int(x) + int(xx); }
    /// Column-block position of a channel, or -1 when absent.
    int slot(Channel c) const {
        switch (c) {
        case Channel::value: return 0;
        case Channel::t: return t ? 1 : -1;
        case Channel::x: return x ? 1 + int(t) : -1;
        case Channel::xx: return xx ? 1 + int(t) + int(x) : -1;
        }
        return -1;
    }
};

/// Pool of activation buffers reused across tapes, so that repeated
/// evaluations of equally sized batches do not go back to the allocator.
class TapeWorkspace {
public:
    Eigen::MatrixXd take(Eigen::Index rows, Eigen::Index cols) {
        for (std::size_t i = pool_.size(); i-- > 0;) {
            if (pool_[i].size() == rows * cols) {
                Eigen::MatrixXd m = std::move(pool_[i]);
                pool_.erase(pool_.begin() + std::ptrdiff_t(i));
                m.resize(rows, cols);
                return m;
            }
        }
        return Eigen::MatrixXd(rows, cols);
    }

    void give(Eigen::MatrixXd&& m) {
        if (m.size() > 0) pool_.push_back(std::move(m));
    }

private:
    std::vector<Eigen::MatrixXd> pool_;
};

class JetTape {
public:
    JetTape(const MlpParams& params, const PointMatrix& points, ChannelSet channels, TapeWorkspace* workspace = nullptr)
        : params_(&params), points_(&points), ch_(channels), n_(points.cols()), ws_(workspace ? workspace : &own_) {
        if (ch_.xx && !ch_.x) throw UsageError("d2/dx2 channel requires the d/dx channel");
        try {
            forward();
        } catch (...) {
            release();
            throw;
        }
    }

    JetTape(const JetTape&) = delete;
    JetTape& operator=(const JetTape&) = delete;
    ~JetTape() { release(); }

    Eigen::Index size() const { return n_; }
    ChannelSet channels() const { return ch_; }

    /// Output row (1 x C*N) for the requested channel, zero-copy.
    Eigen::Ref<const Eigen::RowVectorXd> output(Channel c) const {
        const int s = ch_.slot(c);
        if (s < 0) throw UsageError("channel not tracked by this tape");
        return nodes_.back().out.row(0).segment(Eigen::Index(s) * n_, n_);
    }

    KernelJet jet(Eigen::Index i) const {
        KernelJet j;
        j.K = output(Channel::value)(i);
        if (ch_.t) j.K_t = output(Channel::t)(i);
        if (ch_.x) j.K_x = output(Channel::x)(i);
        if (ch_.xx) j.K_xx = output(Channel::xx)(i);
        return j;
    }

    /// Reverse sweep. `adjoint` is the (1 x C*N) derivative of a scalar loss
    /// with respect to the output channels; the parameter gradient is
    /// accumulated into `grad` in canonical order.
    void backward(const Eigen::RowVectorXd& adjoint, Eigen::Ref<Eigen::VectorXd> grad) const {
        const MlpParams& p = *params_;
        if (adjoint.size() != Eigen::Index(ch_.count()) * n_) throw UsageError("adjoint size mismatch");
        if (grad.size() != p.size()) throw UsageError("gradient size mismatch");
        Eigen::MatrixXd g = ws_->take(1, adjoint.size());
        g = adjoint;
        for (std::size_t k = nodes_.size(); k-- > 0;) {
            const Node& node = nodes_[k];
            if (node.kind == Node::Kind::tanh) {
                Eigen::MatrixXd gz = tanh_adjoint(nodes_[k - 1].out, node.out, g);
                g.swap(gz);
                ws_->give(std::move(gz));
                continue;
            }
            const std::size_t l = node.layer;
            Eigen::Map<RowMatrix> gw(grad.data() + p.offset(l), p.fan_out(l), p.fan_in(l));
            Eigen::Map<Eigen::VectorXd> gb(grad.data() + p.offset(l) + Eigen::Index(p.fan_out(l)) * p.fan_in(l),
                                           p.fan_out(l));
            gb += g.leftCols(n_).rowwise().sum();
            if (l == 0) {
                gw.noalias() += g.leftCols(n_) * points_->transpose();
                if (ch_.t) gw.col(0) += g.middleCols(Eigen::Index(ch_.slot(Channel::t)) * n_, n_).rowwise().sum();
                if (ch_.x) gw.col(1) += g.middleCols(Eigen::Index(ch_.slot(Channel::x)) * n_, n_).rowwise().sum();
                break;
            }
            const Eigen::MatrixXd& input = nodes_[k - 1].out;
            gw.noalias() += g * input.transpose();
            Eigen::MatrixXd gin = ws_->take(p.fan_in(l), g.cols());
            gin.noalias() = p.weight(l).transpose() * g;
            g.swap(gin);
            ws_->give(std::move(gin));
        }
        ws_->give(std::move(g));
    }

private:
    struct Node {
        enum class Kind { affine, tanh } kind;
        std::size_t layer;
        Eigen::MatrixXd out;
    };

    auto block(Eigen::MatrixXd& m, Channel c) const {
        return m.middleCols(Eigen::Index(ch_.slot(c)) * n_, n_).array();
    }
    auto block(const Eigen::MatrixXd& m, Channel c) const {
        return m.middleCols(Eigen::Index(ch_.slot(c)) * n_, n_).array();
    }

    void check_finite(const Eigen::MatrixXd& m, std::size_t layer) const {
        if (!m.allFinite())
            throw NumericError("non-finite activation in layer " + std::to_string(layer), static_cast<std::ptrdiff_t>(layer));
    }

    void forward() {
        const MlpParams& p = *params_;
        const int C = ch_.count();
        nodes_.reserve(2 * p.layer_count());
        for (std::size_t l = 0; l < p.layer_count(); ++l) {
            Eigen::MatrixXd z = ws_->take(p.fan_out(l), Eigen::Index(C) * n_);
            if (l == 0) {
                const auto w = p.weight(0);
                z.leftCols(n_).noalias() = w * (*points_);
                if (ch_.t) z.middleCols(Eigen::Index(ch_.slot(Channel::t)) * n_, n_) = w.col(0).replicate(1, n_);
                if (ch_.x) z.middleCols(Eigen::Index(ch_.slot(Channel::x)) * n_, n_) = w.col(1).replicate(1, n_);
                if (ch_.xx) z.middleCols(Eigen::Index(ch_.slot(Channel::xx)) * n_, n_).setZero();
            } else {
                z.noalias() = p.weight(l) * nodes_.back().out;
            }
            z.leftCols(n_).colwise() += p.bias(l);
            check_finite(z, l);
            nodes_.push_back({Node::Kind::affine, l, std::move(z)});
            if (l + 1 == p.layer_count()) break;
            nodes_.push_back({Node::Kind::tanh, l, tanh_forward(nodes_.back().out)});
        }
    }

    // Channel blocks are contiguous column ranges, so the elementwise jet
    // rules run as fused loops over raw storage.
    const double* chan(const Eigen::MatrixXd& m, Channel c) const {
        return m.data() + Eigen::Index(ch_.slot(c)) * n_ * m.rows();
    }
    double* chan(Eigen::MatrixXd& m, Channel c) const { return m.data() + Eigen::Index(ch_.slot(c)) * n_ * m.rows(); }

    template <class F>
    void dispatch(F&& f) const {
        if (ch_.t && ch_.x && ch_.xx) f(std::true_type{}, std::true_type{}, std::true_type{});
        else if (ch_.t && ch_.x) f(std::true_type{}, std::true_type{}, std::false_type{});
        else if (ch_.t && !ch_.x) f(std::true_type{}, std::false_type{}, std::false_type{});
        else if (ch_.x && ch_.xx) f(std::false_type{}, std::true_type{}, std::true_type{});
        else if (ch_.x) f(std::false_type{}, std::true_type{}, std::false_type{});
        else f(std::false_type{}, std::false_type{}, std::false_type{});
    }

    Eigen::MatrixXd tanh_forward(const Eigen::MatrixXd& z) const {
        Eigen::MatrixXd a = ws_->take(z.rows(), z.cols());
        const Eigen::Index m = z.rows() * n_;
        // 1 - 2/(1+e^{2z}); Eigen vectorizes exp for doubles but not tanh
        block(a, Channel::value) = 1.0 - 2.0 / (1.0 + (2.0 * block(z, Channel::value)).exp());
        dispatch([&](auto T, auto X, auto XX) {
            const double* th = chan(a, Channel::value);
            const double* zt = T ? chan(z, Channel::t) : nullptr;
            const double* zx = X ? chan(z, Channel::x) : nullptr;
            const double* zxx = XX ? chan(z, Channel::xx) : nullptr;
            double* at = T ? chan(a, Channel::t) : nullptr;
            double* ax = X ? chan(a, Channel::x) : nullptr;
            double* axx = XX ? chan(a, Channel::xx) : nullptr;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double h = th[i];
                const double s = 1.0 - h * h;
                if constexpr (decltype(T)::value) at[i] = s * zt[i];
                if constexpr (decltype(X)::value) ax[i] = s * zx[i];
                if constexpr (decltype(XX)::value) axx[i] = s * zxx[i] - 2.0 * h * s * zx[i] * zx[i];
            }
        });
        return a;
    }

    // Adjoint of A = tanh(Z) on all channels:
    //   A_t = s Z_t,  A_x = s Z_x,  A_xx = s Z_xx + s1 Z_x^2
    // with s = 1 - A^2, s1 = -2 A s, s2 = ds1/dZ = -2 s^2 + 4 A^2 s.
    Eigen::MatrixXd tanh_adjoint(const Eigen::MatrixXd& z, const Eigen::MatrixXd& a, const Eigen::MatrixXd& ga) const {
        Eigen::MatrixXd gz = ws_->take(z.rows(), z.cols());
        const Eigen::Index m = z.rows() * n_;
        dispatch([&](auto T, auto X, auto XX) {
            const double* th = chan(a, Channel::value);
            const double* gav = chan(ga, Channel::value);
            double* gzv = chan(gz, Channel::value);
            const double* zt = T ? chan(z, Channel::t) : nullptr;
            const double* gat = T ? chan(ga, Channel::t) : nullptr;
            double* gzt = T ? chan(gz, Channel::t) : nullptr;
            const double* zx = X ? chan(z, Channel::x) : nullptr;
            const double* gax = X ? chan(ga, Channel::x) : nullptr;
            double* gzx = X ? chan(gz, Channel::x) : nullptr;
            const double* zxx = XX ? chan(z, Channel::xx) : nullptr;
            const double* gaxx = XX ? chan(ga, Channel::xx) : nullptr;
            double* gzxx = XX ? chan(gz, Channel::xx) : nullptr;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double h = th[i];
                const double s = 1.0 - h * h;
                const double s1 = -2.0 * h * s;
                double gv = s * gav[i];
                if constexpr (decltype(T)::value) {
                    gzt[i] = s * gat[i];
                    gv += s1 * zt[i] * gat[i];
                }
                if constexpr (decltype(XX)::value) {
                    const double s2 = -2.0 * s * s + 4.0 * h * h * s;
                    gzxx[i] = s * gaxx[i];
                    gzx[i] = s * gax[i] + 2.0 * s1 * zx[i] * gaxx[i];
                    gv += s1 * (zx[i] * gax[i] + zxx[i] * gaxx[i]) + s2 * zx[i] * zx[i] * gaxx[i];
                } else if constexpr (decltype(X)::value) {
                    gzx[i] = s * gax[i];
                    gv += s1 * zx[i] * gax[i];
                }
                gzv[i] = gv;
            }
        });
        return gz;
    }

    void release() {
        for (auto& node : nodes_) ws_->give(std::move(node.out));
        nodes_.clear();
    }

    const MlpParams* params_;
    const PointMatrix* points_;
    ChannelSet ch_;
    Eigen::Index n_;
    TapeWorkspace own_;
    TapeWorkspace* ws_;
    std::vector<Node> nodes_;
};

/// K, K_t, K_x, K_xx at one point.
inline KernelJet forward_jets(const MlpParams& params, double t, double x, double y) {
    PointMatrix p(3, 1);
    p << t, x, y;
    return JetTape(params, p, ChannelSet::all()).jet(0);
}

/// Order-0 network output for a batch of points.
inline Eigen::RowVectorXd forward_values(const MlpParams& params, const PointMatrix& points) {
    if (points.cols() == 0) return {};
    return JetTape(params, points, ChannelSet::value_only()).output(Channel::value);
}

// ---------------------------------------------------------------------------
// Losses over jets.

/// One squared-residual loss term, value = (1/2) mean_i r_i^2 with
///   r_i = a_i K + b_i K_t + c_i K_x + e_i K_xx - target_i.
/// Empty coefficient vectors mean zero and drop the channel from the tape.
/// Every PDE, symmetry, initial, data and boundary residual of a linear
/// parabolic problem has this shape.
struct LinearJetTerm {
    std::string name;
    PointMatrix points;
    Eigen::VectorXd c_value;
    Eigen::VectorXd c_t;
    Eigen::VectorXd c_x;
    Eigen::VectorXd c_xx;
    Eigen::VectorXd target;
    double weight = 1.0;

    Eigen::Index size() const { return points.cols(); }

    ChannelSet channels() const {
        ChannelSet ch;
        ch.t = c_t.size() > 0;
        ch.xx = c_xx.size() > 0;
        ch.x = c_x.size() > 0 || ch.xx;
        return ch;
    }

    void validate() const {
        const Eigen::Index n = size();
        auto ok = [n](const Eigen::VectorXd& v) { return v.size() == 0 || v.size() == n; };
        if (!ok(c_value) || !ok(c_t) || !ok(c_x) || !ok(c_xx) || !ok(target))
            throw UsageError("loss term '" + name + "': coefficient length does not match point count");
        if (!(weight >= 0.0) || !std::isfinite(weight)) throw UsageError("loss term '" + name + "': weight must be finite and >= 0");
    }
};

struct LossEvaluation {
    /// Unweighted components, one per term, in term order.
    std::vector<double> components;
    double total = 0.0;
    /// Empty when the gradient was not requested.
    Eigen::VectorXd grad;
};

namespace detail {

/// Points per tape. Small enough that one tape's activations stay in cache.
inline constexpr Eigen::Index kChunk = 256;

inline Eigen::ArrayXd term_residual(const LinearJetTerm& term, const JetTape& tape, Eigen::Index first) {
    const Eigen::Index n = tape.size();
    Eigen::ArrayXd r = Eigen::ArrayXd::Zero(n);
    auto add = [&](const Eigen::VectorXd& c, Channel ch) {
        if (c.size() == 0) return;
        r += c.segment(first, n).array() * tape.output(ch).transpose().array();
    };
    add(term.c_value, Channel::value);
    add(term.c_t, Channel::t);
    add(term.c_x, Channel::x);
    add(term.c_xx, Channel::xx);
    if (term.target.size() > 0) r -= term.target.segment(first, n).array();
    return r;
}

} // namespace detail

/// Loss components, weighted total and (optionally) the parameter gradient.
/// Points are processed in fixed chunks in index order, so the component
/// values do not depend on `with_gradient` and repeat bitwise.
inline LossEvaluation loss_gradient(const MlpParams& params, const std::vector<LinearJetTerm>& terms, bool with_gradient = true,
                                    TapeWorkspace* workspace = nullptr) {
    LossEvaluation out;
    out.components.reserve(terms.size());
    if (with_gradient) out.grad = Eigen::VectorXd::Zero(params.size());
    PointMatrix chunk;
    TapeWorkspace local;
    TapeWorkspace* ws = workspace ? workspace : &local;
    for (const auto& term : terms) {
        term.validate();
        const Eigen::Index n = term.size();
        if (n == 0) {
            out.components.push_back(0.0);
            continue;
        }
        const ChannelSet ch = term.channels();
        const bool backprop = with_gradient && term.weight != 0.0;
        double sum_sq = 0.0;
        for (Eigen::Index first = 0; first < n; first += detail::kChunk) {
            const Eigen::Index m = std::min(detail::kChunk, n - first);
            chunk = term.points.middleCols(first, m);
            std::optional<JetTape> tape;
            try {
                tape.emplace(params, chunk, ch, ws);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " while evaluating term '" + term.name + "'", e.where(), term.name);
            }
            const Eigen::ArrayXd r = detail::term_residual(term, *tape, first);
            if (!r.allFinite()) {
                Eigen::Index bad = 0;
                while (std::isfinite(r(bad))) ++bad;
                throw NumericError("non-finite residual in term '" + term.name + "' at point " + std::to_string(first + bad),
                                   first + bad, term.name);
            }
            sum_sq += r.square().sum();
            if (!backprop) continue;

            // d/dK_ch of weight * (1/2N) sum r^2 = (weight/N) * r * coefficient
            const Eigen::ArrayXd g = r * (term.weight / double(n));
            Eigen::RowVectorXd adjoint = Eigen::RowVectorXd::Zero(Eigen::Index(ch.count()) * m);
            auto set = [&](const Eigen::VectorXd& c, Channel channel) {
                if (c.size() == 0) return;
                adjoint.segment(Eigen::Index(ch.slot(channel)) * m, m) = (g * c.segment(first, m).array()).transpose().matrix();
            };
            set(term.c_value, Channel::value);
            set(term.c_t, Channel::t);
            set(term.c_x, Channel::x);
            set(term.c_xx, Channel::xx);
            tape->backward(adjoint, out.grad);
        }
        const double value = 0.5 * sum_sq / double(n);
        out.components.push_back(value);
        out.total += term.weight * value;
    }
    return out;
}

} // namespace gspinn
