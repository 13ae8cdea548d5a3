#include "tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qfin::detail {

std::size_t sturm_count(std::span<const double> diagonal, double off, double shift) {
    const double e2 = off * off;
    const double tiny = std::numeric_limits<double>::min() * 1e4;
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < diagonal.size(); ++i) {
        q = (diagonal[i] - shift) - (i == 0 ? 0.0 : e2 / q);
        if (q == 0.0) q = -tiny;
        if (q < 0.0) ++count;
    }
    return count;
}

double bisect_eigenvalue(std::span<const double> diagonal, double off, std::size_t k) {
    const auto [mn, mx] = std::minmax_element(diagonal.begin(), diagonal.end());
    const double radius = 2.0 * std::abs(off);
    double lo = *mn - radius;
    double hi = *mx + radius;
    const double scale = std::max(std::abs(lo), std::abs(hi));
    lo -= 1e-12 * scale + 1e-300;
    hi += 1e-12 * scale + 1e-300;
    const double eps = std::numeric_limits<double>::epsilon();
    for (int it = 0; it < 256; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (hi - lo <= 2.0 * eps * std::max(std::abs(lo), std::abs(hi))) break;
        if (sturm_count(diagonal, off, mid) > k)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> shifted_solve(std::span<const double> diagonal, double off, double shift,
                                  std::span<const double> rhs, double tiny) {
    // Gaussian elimination with row interchanges; U carries a second
    // superdiagonal (fill from pivoting), as in LAPACK's dgtsv.
    const std::size_t n = diagonal.size();
    std::vector<double> d(n), du(n, 0.0), du2(n, 0.0), dl(n, 0.0), b(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n; ++i) d[i] = diagonal[i] - shift;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        du[i] = off;
        dl[i] = off;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (std::abs(d[i]) < tiny) d[i] = d[i] < 0.0 ? -tiny : tiny;
            const double f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            const double f = d[i] / dl[i];
            d[i] = dl[i];
            const double tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= f * b[i];
        }
    }
    if (std::abs(d[n - 1]) < tiny) d[n - 1] = d[n - 1] < 0.0 ? -tiny : tiny;
    b[n - 1] /= d[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for (std::size_t ii = n >= 2 ? n - 2 : 0; ii-- > 0;)
        b[ii] = (b[ii] - du[ii] * b[ii + 1] - du2[ii] * b[ii + 2]) / d[ii];
    return b;
}

bool thomas_solve(std::span<const std::complex<double>> lower,
                  std::span<const std::complex<double>> diagonal,
                  std::span<const std::complex<double>> upper,
                  std::span<std::complex<double>> rhs) {
    const std::size_t n = diagonal.size();
    std::vector<std::complex<double>> c(n);
    std::complex<double> denom = diagonal[0];
    if (std::abs(denom) == 0.0) return false;
    if (n > 1) c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diagonal[i] - lower[i - 1] * c[i - 1];
        if (std::abs(denom) == 0.0 || !std::isfinite(std::abs(denom))) return false;
        if (i + 1 < n) c[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
    return true;
}

} // namespace qfin::detail
