#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace recflex {

// Dense named parameter with a paired gradient buffer. "Rows" are slices
// along the first axis; backward passes mark the rows they touch so the
// optimizer can apply sparse L2 regularization.
template <typename T>
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<std::uint8_t> touched;  // per row

    static Tensor zeros(std::vector<std::int64_t> shape) {
        Tensor t;
        t.shape = std::move(shape);
        std::int64_t n = 1;
        for (auto d : t.shape) {
            if (d < 0) throw std::invalid_argument("negative tensor dimension");
            n *= d;
        }
        t.value.assign(static_cast<std::size_t>(n), T(0));
        t.grad.assign(static_cast<std::size_t>(n), T(0));
        t.touched.assign(static_cast<std::size_t>(t.rows()), 0);
        return t;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
    std::int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::int64_t row_size() const { return rows() ? numel() / rows() : 0; }

    T* row(std::int64_t i) { return value.data() + i * row_size(); }
    const T* row(std::int64_t i) const { return value.data() + i * row_size(); }
    T* grad_row(std::int64_t i) { return grad.data() + i * row_size(); }

    void mark(std::int64_t row_index) { touched[static_cast<std::size_t>(row_index)] = 1; }
    void mark_all() { std::fill(touched.begin(), touched.end(), 1); }

    void zero_grad() {
        std::fill(grad.begin(), grad.end(), T(0));
        std::fill(touched.begin(), touched.end(), 0);
    }
};

template <typename T>
struct ParamSet {
    std::vector<std::string> names;  // manifest order
    std::vector<Tensor<T>> tensors;
    std::unordered_map<std::string, std::size_t> index;

    Tensor<T>& add(const std::string& name, std::vector<std::int64_t> shape) {
        if (index.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
        index.emplace(name, tensors.size());
        names.push_back(name);
        tensors.push_back(Tensor<T>::zeros(std::move(shape)));
        return tensors.back();
    }
    Tensor<T>& get(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("no parameter: " + name);
        return tensors[it->second];
    }
    const Tensor<T>& get(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("no parameter: " + name);
        return tensors[it->second];
    }

    std::size_t size() const { return tensors.size(); }
    std::int64_t total_params() const {
        std::int64_t n = 0;
        for (const auto& t : tensors) n += t.numel();
        return n;
    }
    void zero_grads() {
        for (auto& t : tensors) t.zero_grad();
    }

    std::vector<T> snapshot() const {
        std::vector<T> out;
        out.reserve(static_cast<std::size_t>(total_params()));
        for (const auto& t : tensors) out.insert(out.end(), t.value.begin(), t.value.end());
        return out;
    }
    void restore(const std::vector<T>& snap) {
        std::size_t offset = 0;
        for (auto& t : tensors) {
            if (offset + t.value.size() > snap.size())
                throw std::invalid_argument("snapshot size mismatch");
            std::copy(snap.begin() + static_cast<std::ptrdiff_t>(offset),
                      snap.begin() + static_cast<std::ptrdiff_t>(offset + t.value.size()),
                      t.value.begin());
            offset += t.value.size();
        }
        if (offset != snap.size()) throw std::invalid_argument("snapshot size mismatch");
    }
};

// Plain row-major matrix used for passing activations around.
template <typename T>
struct Matrix {
    std::int64_t n_rows = 0;
    std::int64_t n_cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c)
        : n_rows(r), n_cols(c), data(static_cast<std::size_t>(r * c), T(0)) {}

    T* row(std::int64_t i) { return data.data() + i * n_cols; }
    const T* row(std::int64_t i) const { return data.data() + i * n_cols; }
    T& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * n_cols + j)]; }
    T at(std::int64_t i, std::int64_t j) const {
        return data[static_cast<std::size_t>(i * n_cols + j)];
    }
};

}  // namespace recflex
