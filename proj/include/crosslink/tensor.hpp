#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace crosslink {

// Dense row-major double tensor.  Complex-valued quantities that cross the
// real-valued layer-graph boundary use the interleaved convention: a complex
// vector of length L maps to 2L reals [re0, im0, re1, im1, ...].
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> dims) : shape(std::move(dims)) {
        data.assign(std::size_t(numel(shape)), 0.0);
    }

    Tensor(std::vector<std::int64_t> dims, std::vector<double> values)
        : shape(std::move(dims)), data(std::move(values)) {
        if (std::int64_t(data.size()) != numel(shape))
            throw std::invalid_argument("tensor data size does not match shape");
    }

    static std::int64_t numel(const std::vector<std::int64_t>& dims) {
        std::int64_t n = 1;
        for (auto d : dims) {
            if (d < 0) throw std::invalid_argument("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return std::int64_t(data.size()); }

    std::int64_t dim(int axis) const {
        int r = int(shape.size());
        if (axis < 0) axis += r;
        if (axis < 0 || axis >= r)
            throw std::invalid_argument("tensor axis out of range");
        return shape[std::size_t(axis)];
    }

    // Size of the trailing (feature) axis and the collapsed leading size.
    std::int64_t last_dim() const {
        if (shape.empty()) throw std::invalid_argument("tensor has no axes");
        return shape.back();
    }
    std::int64_t rows() const { return last_dim() == 0 ? 0 : size() / last_dim(); }

    double* row(std::int64_t r) { return data.data() + r * last_dim(); }
    const double* row(std::int64_t r) const {
        return data.data() + r * last_dim();
    }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    static std::string shape_str(const std::vector<std::int64_t>& dims) {
        std::string s = "[";
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(dims[i]);
        }
        return s + "]";
    }
    std::string shape_str() const { return shape_str(shape); }
};

}  // namespace crosslink
