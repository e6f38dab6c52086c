#ifndef CVRP_POLICY_TENSOR_HPP
#define CVRP_POLICY_TENSOR_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace cvrp::policy {

// Dense row-major matrix of doubles. Vectors are 1 x n.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    Mat& operator+=(const Mat& o) {
        assert(same_shape(o));
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (double& x : v) x *= s;
        return *this;
    }
};

// out = a * b
inline void matmul(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols == b.rows);
    out = Mat(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
}

// out += a^T * b  (gradient accumulation for weights)
inline void add_matmul_tn(const Mat& a, const Mat& b, Mat& out) {
    assert(a.rows == b.rows && out.rows == a.cols && out.cols == b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
}

// out = a * b^T
inline void matmul_nt(const Mat& a, const Mat& b, Mat& out) {
    assert(a.cols == b.cols);
    out = Mat(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            out.at(i, j) = s;
        }
    }
}

inline void add_bias_rows(Mat& m, const Mat& bias) {
    assert(bias.rows == 1 && bias.cols == m.cols);
    for (int i = 0; i < m.rows; ++i) {
        double* row = m.row(i);
        for (int j = 0; j < m.cols; ++j) row[j] += bias.v[j];
    }
}

inline bool all_finite(const Mat& m) {
    for (double x : m.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace cvrp::policy

#endif
