#include "wsireport/tensor.hpp"
#include "wsireport/errors.hpp"

#include <string>

namespace wsireport {

namespace {

void check(bool ok, const char* what) {
    if (!ok)
        throw ValidationError(std::string("matmul shape mismatch: ") + what);
}

} // namespace

Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows, b.cols);
    addmul(c, a, b);
    return c;
}

void addmul(Mat& c, const Mat& a, const Mat& b) {
    check(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "A*B");
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            double av = ar[k];
            if (av == 0.0)
                continue;
            const double* br = b.row(k);
            for (int j = 0; j < b.cols; ++j)
                cr[j] += av * br[j];
        }
    }
}

void addmul_ta(Mat& c, const Mat& a, const Mat& b) {
    check(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "A^T*B");
    for (int k = 0; k < a.rows; ++k) {
        const double* ar = a.row(k);
        const double* br = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            double av = ar[i];
            if (av == 0.0)
                continue;
            double* cr = c.row(i);
            for (int j = 0; j < b.cols; ++j)
                cr[j] += av * br[j];
        }
    }
}

void addmul_tb(Mat& c, const Mat& a, const Mat& b) {
    check(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, "A*B^T");
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k)
                s += ar[k] * br[k];
            cr[j] += s;
        }
    }
}

} // namespace wsireport
