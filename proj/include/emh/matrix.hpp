#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "emh/errors.hpp"

namespace emh {

// Dense row-major matrix of doubles. Rows are samples, columns features.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) {
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Matrix select_rows(std::size_t begin, std::size_t end) const {
        if (begin > end || end > rows_)
            throw ShapeError("row slice out of range");
        Matrix out(end - begin, cols_);
        for (std::size_t r = begin; r < end; ++r)
            for (std::size_t c = 0; c < cols_; ++c)
                out(r - begin, c) = (*this)(r, c);
        return out;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace emh
