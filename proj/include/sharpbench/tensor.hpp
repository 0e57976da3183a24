#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sharpbench/error.hpp"

namespace sharpbench {

namespace detail {

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (const std::size_t d : shape) n *= d;
    return n;
}

}  // namespace detail

// Dense row-major tensor of 64-bit floats. Value-semantic handle: copies share
// the underlying buffer, which is what lets optimizer updates through a
// ParameterVector be visible to the model that owns the same tensors.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad = false) {
        if (detail::shape_numel(shape) != data.size()) {
            throw ShapeError("tensor: shape " + detail::shape_to_string(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
        }
        impl_ = std::make_shared<Impl>();
        impl_->shape = std::move(shape);
        impl_->data = std::move(data);
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        std::vector<double> data(detail::shape_numel(shape), 0.0);
        return Tensor(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false) {
        std::vector<double> data(detail::shape_numel(shape), value);
        return Tensor(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return Tensor({1}, {value}, requires_grad);
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad = false) {
        return Tensor({rows, cols}, std::move(data), requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }

    const std::vector<std::size_t>& shape() const { return check().shape; }

    std::size_t numel() const { return check().data.size(); }

    std::size_t rank() const { return check().shape.size(); }

    std::size_t rows() const {
        require_rank2("rows");
        return impl_->shape[0];
    }

    std::size_t cols() const {
        require_rank2("cols");
        return impl_->shape[1];
    }

    double value() const {
        if (numel() != 1) {
            throw ShapeError("tensor: value() on non-scalar of shape " +
                             detail::shape_to_string(impl_->shape));
        }
        return impl_->data[0];
    }

    double at(std::size_t i) const { return check().data.at(i); }

    double at(std::size_t i, std::size_t j) const {
        require_rank2("at");
        return impl_->data.at(i * impl_->shape[1] + j);
    }

    std::vector<double>& values() { return check().data; }
    const std::vector<double>& values() const { return check().data; }

    bool requires_grad() const { return check().requires_grad; }

    bool has_grad() const { return defined() && !impl_->grad.empty(); }

    const std::vector<double>& grad() const {
        if (!has_grad()) throw Error("tensor: gradient not populated");
        return impl_->grad;
    }

    // Handles share storage, so mutation through a const handle is allowed;
    // const protects the handle, not the buffer.
    void zero_grad() const {
        if (defined()) impl_->grad.clear();
    }

    // Lazily allocates a zero gradient buffer and adds `g` into it. A tensor
    // consumed by several ops therefore receives the sum of all upstream
    // contributions.
    void accumulate_grad(std::span<const double> g) const {
        Impl& im = check();
        if (g.size() != im.data.size()) {
            throw ShapeError("tensor: gradient size " + std::to_string(g.size()) +
                             " does not match value size " + std::to_string(im.data.size()));
        }
        if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) im.grad[i] += g[i];
    }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        std::vector<std::size_t> shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty means "not populated"
        bool requires_grad = false;
    };

    Impl& check() const {
        if (!impl_) throw Error("tensor: use of default-constructed tensor");
        return *impl_;
    }

    void require_rank2(const char* who) const {
        if (check().shape.size() != 2) {
            throw ShapeError(std::string("tensor: ") + who + " requires a matrix, got shape " +
                             detail::shape_to_string(impl_->shape));
        }
    }

    std::shared_ptr<Impl> impl_;
};

namespace detail {

inline void check_all_finite(const char* op, std::span<const double> xs) {
    for (const double x : xs) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}

}  // namespace detail

}  // namespace sharpbench
