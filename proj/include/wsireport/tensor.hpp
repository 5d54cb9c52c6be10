#pragma once

#include <cstddef>
#include <vector>

namespace wsireport {

/// Dense row-major double matrix. Vectors are 1 x n. All decoder math
/// runs in double; files store f32.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

/// C = A * B
Mat matmul(const Mat& a, const Mat& b);
/// C += A * B
void addmul(Mat& c, const Mat& a, const Mat& b);
/// C += A^T * B
void addmul_ta(Mat& c, const Mat& a, const Mat& b);
/// C += A * B^T
void addmul_tb(Mat& c, const Mat& a, const Mat& b);

} // namespace wsireport
