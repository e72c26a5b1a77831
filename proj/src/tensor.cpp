#include "protosum/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace protosum {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("Matrix: " + std::to_string(data_.size()) +
                                    " values for shape " + protosum::shape_string(rows, cols));
    }
}

Matrix Matrix::row(std::vector<double> values) {
    const auto n = values.size();
    return Matrix(1, n, std::move(values));
}

Matrix Matrix::column(std::vector<double> values) {
    const auto n = values.size();
    return Matrix(n, 1, std::move(values));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::add_inplace(const Matrix& other) {
    if (!same_shape(other)) {
        throw std::invalid_argument("add_inplace: shape mismatch " + shape_string() + " vs " +
                                    other.shape_string());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const { return protosum::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

}  // namespace protosum
