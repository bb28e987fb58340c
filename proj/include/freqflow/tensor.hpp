#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "freqflow/errors.hpp"

namespace freqflow {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b)
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// Dense row-major array of doubles.
class RealArray {
public:
    RealArray() = default;
    explicit RealArray(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
    RealArray(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_))
            throw DimensionError("RealArray: data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
    }
    static RealArray vector(std::vector<double> v) {
        Shape s{v.size()};
        return RealArray(std::move(s), std::move(v));
    }

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t ndim() const { return shape_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D accessors (row-major).
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_.at(1) + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_.at(1) + c]; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    RealArray reshaped(Shape s) const {
        if (shape_numel(s) != data_.size())
            throw DimensionError("reshape: element count mismatch");
        return RealArray(std::move(s), data_);
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

// Dense row-major array of complex values stored as interleaved (re, im)
// pairs of doubles. shape() describes the complex element layout; the raw
// buffer holds 2*numel() doubles.
class ComplexArray {
public:
    ComplexArray() = default;
    explicit ComplexArray(Shape shape) : shape_(std::move(shape)), data_(2 * shape_numel(shape_), 0.0) {}
    ComplexArray(Shape shape, std::vector<double> interleaved)
        : shape_(std::move(shape)), data_(std::move(interleaved)) {
        if (data_.size() != 2 * shape_numel(shape_))
            throw DimensionError("ComplexArray: interleaved length does not match shape " + shape_str(shape_));
    }
    static ComplexArray vector(std::initializer_list<std::complex<double>> vs) {
        ComplexArray out(Shape{vs.size()});
        std::size_t i = 0;
        for (auto& v : vs) out.set(i++, v);
        return out;
    }

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return shape_numel(shape_); }
    std::size_t ndim() const { return shape_.size(); }

    std::complex<double> get(std::size_t i) const { return {data_[2 * i], data_[2 * i + 1]}; }
    void set(std::size_t i, std::complex<double> v) {
        data_[2 * i] = v.real();
        data_[2 * i + 1] = v.imag();
    }
    double re(std::size_t i) const { return data_[2 * i]; }
    double im(std::size_t i) const { return data_[2 * i + 1]; }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    // Lossless view as a real array with a trailing dimension of 2.
    RealArray to_split_real() const {
        Shape s = shape_;
        s.push_back(2);
        return RealArray(std::move(s), data_);
    }
    static ComplexArray from_split_real(const RealArray& r) {
        if (r.ndim() < 1 || r.shape().back() != 2)
            throw DimensionError("from_split_real: trailing dimension must be 2");
        Shape s(r.shape().begin(), r.shape().end() - 1);
        return ComplexArray(std::move(s), r.vec());
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

inline double amplitude(std::complex<double> v) { return std::abs(v); }
inline double phase(std::complex<double> v) { return std::arg(v); }

// Elementwise complex product with broadcasting over leading dimensions:
// one operand's shape must be a suffix of the other's.
inline ComplexArray complex_mul(const ComplexArray& a, const ComplexArray& b) {
    const ComplexArray* big = &a;
    const ComplexArray* small = &b;
    if (big->numel() < small->numel()) std::swap(big, small);
    const Shape& bs = big->shape();
    const Shape& ss = small->shape();
    bool scalar = small->numel() == 1;
    if (!scalar && (ss.size() > bs.size() || !std::equal(ss.rbegin(), ss.rend(), bs.rbegin())))
        throw DimensionError("complex_mul: shapes not broadcast-compatible: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::size_t inner = small->numel();
    if (inner == 0) throw DimensionError("complex_mul: empty operand");
    ComplexArray out(bs);
    for (std::size_t i = 0; i < big->numel(); ++i) {
        std::complex<double> x = big->get(i);
        std::complex<double> y = small->get(i % inner);
        out.set(i, big == &a ? x * y : y * x);
    }
    return out;
}

// y[j] = sum_k W[j,k]*x[k] + b[j] under complex arithmetic.
inline ComplexArray complex_matvec(const ComplexArray& W, const ComplexArray& x, const ComplexArray& b) {
    if (W.ndim() != 2) throw DimensionError("complex_matvec: W must be 2-D");
    std::size_t kout = W.shape()[0], kin = W.shape()[1];
    if (x.shape() != Shape{kin}) throw DimensionError("complex_matvec: inner dimensions disagree");
    if (b.shape() != Shape{kout}) throw DimensionError("complex_matvec: bias length mismatch");
    ComplexArray y(Shape{kout});
    for (std::size_t j = 0; j < kout; ++j) {
        std::complex<double> acc = b.get(j);
        for (std::size_t k = 0; k < kin; ++k) acc += W.get(j * kin + k) * x.get(k);
        y.set(j, acc);
    }
    return y;
}

inline double max_abs_diff(const RealArray& a, const RealArray& b) {
    require_same_shape(a.shape(), b.shape(), "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const ComplexArray& a, const ComplexArray& b) {
    require_same_shape(a.shape(), b.shape(), "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < 2 * a.numel(); ++i) m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    return m;
}

} // namespace freqflow
