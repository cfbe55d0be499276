#pragma once

#include "gspinn/errors.hpp"
#include "gspinn/rng.hpp"

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gspinn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { tanh = 0 };

inline std::string arch_string(const std::vector<int>& widths) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    os << ']';
    return os.str();
}

/// Parameters of the kernel surrogate K(t, x, y): an MLP 3 -> hidden... -> 1
/// with tanh on every hidden layer and a linear output.
///
/// All parameters live in one flat vector in canonical order: for each layer
/// the weight matrix (n_out x n_in, row-major) followed by its bias. The
/// optimizers and the parameter file use this order directly.
class MlpParams {
public:
    MlpParams() = default;

    explicit MlpParams(std::vector<int> widths, std::uint64_t seed = 0) : widths_(std::move(widths)), seed_(seed) {
        validate_arch(widths_);
        offsets_.reserve(widths_.size());
        Eigen::Index off = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            offsets_.push_back(off);
            off += static_cast<Eigen::Index>(widths_[l] + 1) * widths_[l + 1];
        }
        offsets_.push_back(off);
        values_ = Eigen::VectorXd::Zero(off);
    }

    static void validate_arch(const std::vector<int>& widths) {
        if (widths.size() < 2) throw UsageError("architecture needs at least input and output widths");
        if (widths.front() != 3) throw UsageError("architecture must start with 3 inputs (t, x, y), got " + arch_string(widths));
        if (widths.back() != 1) throw UsageError("architecture must end with 1 output, got " + arch_string(widths));
        for (int w : widths)
            if (w < 1) throw UsageError("layer widths must be >= 1, got " + arch_string(widths));
    }

    const std::vector<int>& widths() const { return widths_; }
    std::size_t layer_count() const { return widths_.size() - 1; }
    int fan_in(std::size_t l) const { return widths_[l]; }
    int fan_out(std::size_t l) const { return widths_[l + 1]; }
    Activation activation() const { return Activation::tanh; }
    std::uint64_t seed() const { return seed_; }
    Eigen::Index size() const { return values_.size(); }

    Eigen::Map<const RowMatrix> weight(std::size_t l) const {
        return {values_.data() + offsets_[l], fan_out(l), fan_in(l)};
    }
    Eigen::Map<RowMatrix> weight(std::size_t l) { return {values_.data() + offsets_[l], fan_out(l), fan_in(l)}; }
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
        return {values_.data() + offsets_[l] + Eigen::Index(fan_out(l)) * fan_in(l), fan_out(l)};
    }
    Eigen::Map<Eigen::VectorXd> bias(std::size_t l) {
        return {values_.data() + offsets_[l] + Eigen::Index(fan_out(l)) * fan_in(l), fan_out(l)};
    }
    Eigen::Index offset(std::size_t l) const { return offsets_[l]; }

    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

    /// Plain forward pass.
    double evaluate(double t, double x, double y) const {
        Eigen::VectorXd a(3);
        a << t, x, y;
        for (std::size_t l = 0; l < layer_count(); ++l) {
            Eigen::VectorXd z = weight(l) * a + bias(l);
            a = (l + 1 < layer_count()) ? Eigen::VectorXd(z.array().tanh()) : z;
        }
        return a(0);
    }

    friend bool operator==(const MlpParams& a, const MlpParams& b) {
        return a.widths_ == b.widths_ && a.values_.size() == b.values_.size() &&
               std::memcmp(a.values_.data(), b.values_.data(), sizeof(double) * a.values_.size()) == 0;
    }

private:
    std::vector<int> widths_;
    std::vector<Eigen::Index> offsets_;
    Eigen::VectorXd values_;
    std::uint64_t seed_ = 0;
};

/// Xavier-uniform weights in +-sqrt(6/(n_in+n_out)), zero biases.
inline MlpParams init_mlp(const std::vector<int>& widths, std::uint64_t seed) {
    MlpParams p(widths, seed);
    const CounterRng rng(seed, Stream::init_weights);
    std::uint64_t k = 0;
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        const double bound = std::sqrt(6.0 / (p.fan_in(l) + p.fan_out(l)));
        auto w = p.weight(l);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound, k++);
        p.bias(l).setZero();
    }
    return p;
}

// ---------------------------------------------------------------------------
// Parameter file: "GSPN", u8 version, u32 layer count (number of widths),
// u32 widths..., then float64 row-major weights and biases per layer.
// All integers and floats little-endian.

inline constexpr std::uint8_t kParamFileVersion = 1;

namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
    unsigned char buf[sizeof(U)];
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(U));
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw FormatError(std::string("truncated parameter file while reading ") + what);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    U v;
    std::memcpy(&v, &bits, sizeof(U));
    return v;
}

} // namespace detail

inline void save_params(const MlpParams& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw UsageError("cannot open parameter file for writing: " + path);
    os.write("GSPN", 4);
    detail::put_le<std::uint8_t>(os, kParamFileVersion);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.widths().size()));
    for (int w : params.widths()) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(w));
    for (Eigen::Index i = 0; i < params.size(); ++i) detail::put_le<double>(os, params.values()(i));
    if (!os) throw UsageError("failed writing parameter file: " + path);
}

/// Load a parameter file. When `expected_arch` is non-empty the stored
/// architecture must match it.
inline MlpParams load_params(const std::string& path, const std::vector<int>& expected_arch = {}) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UsageError("cannot open parameter file: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "GSPN", 4) != 0) throw FormatError("bad magic in parameter file " + path);
    const auto version = detail::get_le<std::uint8_t>(is, "version");
    if (version != kParamFileVersion)
        throw FormatError("unsupported parameter file version " + std::to_string(version) + " (expected " +
                          std::to_string(kParamFileVersion) + ")");
    const auto count = detail::get_le<std::uint32_t>(is, "layer count");
    if (count < 2 || count > 1024) throw FormatError("implausible layer count " + std::to_string(count));
    std::vector<int> widths(count);
    for (auto& w : widths) {
        const auto v = detail::get_le<std::uint32_t>(is, "widths");
        if (v == 0 || v > (1U << 20)) throw FormatError("implausible layer width " + std::to_string(v));
        w = static_cast<int>(v);
    }
    if (!expected_arch.empty() && widths != expected_arch)
        throw FormatError("architecture mismatch: file has " + arch_string(widths) + ", expected " + arch_string(expected_arch));
    MlpParams p;
    try {
        p = MlpParams(widths);
    } catch (const UsageError& e) {
        throw FormatError(std::string("invalid architecture in parameter file: ") + e.what());
    }
    for (Eigen::Index i = 0; i < p.size(); ++i) p.values()(i) = detail::get_le<double>(is, "parameters");
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after parameter payload in " + path);
    if (!p.values().allFinite()) throw FormatError("non-finite parameter in " + path);
    return p;
}

} // namespace gspinn
