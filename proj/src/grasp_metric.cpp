#include "graspgen/grasp_metric.hpp"

#include <cmath>
#include <stdexcept>

namespace graspgen {

void contact_frame(const Vec3& normal, Vec3& t1, Vec3& t2) {
  Vec3 a{1, 0, 0};
  if (std::abs(dot(normal, a)) > 0.9) a = Vec3{0, 1, 0};
  t1 = normalized(cross(normal, a));
  t2 = cross(normal, t1);
}

Mat6 build_grasp_map(const std::vector<Contact>& contacts) {
  Mat6 g(3 * static_cast<int>(contacts.size()));
  int col = 0;
  for (const Contact& c : contacts) {
    if (!std::isfinite(c.position.x) || !std::isfinite(c.position.y) ||
        !std::isfinite(c.position.z) || !std::isfinite(c.normal.x) ||
        !std::isfinite(c.normal.y) || !std::isfinite(c.normal.z))
      throw std::invalid_argument("contact has non-finite components");
    if (std::abs(norm(c.normal) - 1.0) > 1e-6)
      throw std::invalid_argument("contact normal is not unit length");
    Vec3 t1, t2;
    contact_frame(c.normal, t1, t2);
    for (const Vec3& dir : {t1, t2, c.normal}) {
      Vec3 torque = cross(c.position, dir);
      g.at(0, col) = dir.x;
      g.at(1, col) = dir.y;
      g.at(2, col) = dir.z;
      g.at(3, col) = torque.x;
      g.at(4, col) = torque.y;
      g.at(5, col) = torque.z;
      ++col;
    }
  }
  return g;
}

double q_msv(const std::vector<Contact>& contacts) {
  if (contacts.size() <= 1) return 0.0;
  auto sv = singular_values(build_grasp_map(contacts));
  return sv[5];
}

namespace {

// Phase-1 simplex on A x = b, x >= 0 with Bland's rule: minimize the sum
// of one artificial variable per row; the system is feasible exactly when
// that sum reaches zero.
struct Phase1 {
  int rows, nvars;                // structural variables only
  std::vector<double> t;          // rows x (nvars + rows + 1), last col = rhs
  std::vector<double> reduced;    // nvars + rows reduced costs
  std::vector<int> basis;         // per row: column index of the basic var

  int cols() const { return nvars + rows + 1; }
  double& at(int r, int c) { return t[static_cast<size_t>(r) * cols() + c]; }

  Phase1(const std::vector<double>& a, const std::vector<double>& b, int m, int n)
      : rows(m), nvars(n), t(static_cast<size_t>(m) * (n + m + 1), 0.0),
        reduced(static_cast<size_t>(n + m), 0.0), basis(static_cast<size_t>(m)) {
    for (int r = 0; r < m; ++r) {
      double sign = b[static_cast<size_t>(r)] < 0.0 ? -1.0 : 1.0;
      for (int c = 0; c < n; ++c)
        at(r, c) = sign * a[static_cast<size_t>(r) * n + c];
      at(r, n + r) = 1.0;
      at(r, n + m) = sign * b[static_cast<size_t>(r)];
      basis[static_cast<size_t>(r)] = n + r;
    }
    for (int c = 0; c < n; ++c) {
      double s = 0.0;
      for (int r = 0; r < m; ++r) s += at(r, c);
      reduced[static_cast<size_t>(c)] = -s;  // cost 0 minus artificial-basis sum
    }
  }

  // Returns the phase-1 objective (sum of artificials) at termination.
  double solve() {
    const double tol = 1e-9;
    for (int iter = 0; iter < 20000; ++iter) {
      int enter = -1;
      for (int c = 0; c < nvars + rows; ++c) {
        if (reduced[static_cast<size_t>(c)] < -tol) {
          enter = c;
          break;  // Bland: smallest eligible index
        }
      }
      if (enter < 0) break;
      int leave = -1;
      double best = 0.0;
      for (int r = 0; r < rows; ++r) {
        double piv = at(r, enter);
        if (piv <= tol) continue;
        double ratio = at(r, nvars + rows) / piv;
        if (leave < 0 || ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 &&
             basis[static_cast<size_t>(r)] < basis[static_cast<size_t>(leave)])) {
          leave = r;
          best = ratio;
        }
      }
      if (leave < 0) break;  // unbounded improving ray cannot happen in phase 1
      pivot(leave, enter);
    }
    double obj = 0.0;
    for (int r = 0; r < rows; ++r)
      if (basis[static_cast<size_t>(r)] >= nvars) obj += at(r, nvars + rows);
    return obj;
  }

  void pivot(int leave, int enter) {
    double piv = at(leave, enter);
    for (int c = 0; c < cols(); ++c) at(leave, c) /= piv;
    for (int r = 0; r < rows; ++r) {
      if (r == leave) continue;
      double f = at(r, enter);
      if (f == 0.0) continue;
      for (int c = 0; c < cols(); ++c) at(r, c) -= f * at(leave, c);
    }
    double fr = reduced[static_cast<size_t>(enter)];
    for (int c = 0; c < nvars + rows; ++c)
      reduced[static_cast<size_t>(c)] -= fr * at(leave, c);
    basis[static_cast<size_t>(leave)] = enter;
  }
};

}  // namespace

GravityCertificate resist_gravity_certificate(const std::vector<Contact>& contacts,
                                              double mass_kg, const Vec3& up,
                                              const GravityCheckOptions& opts) {
  GravityCertificate cert;
  if (contacts.empty()) return cert;
  Vec3 u = normalized(up);

  const int k = static_cast<int>(contacts.size());
  const int n = 8 * k + 1;  // edge coefficients plus the budget slack
  const int m = 7;          // six wrench equations plus the budget row
  std::vector<double> a(static_cast<size_t>(m) * n, 0.0);
  std::vector<double> b(m, 0.0);

  for (int i = 0; i < k; ++i) {
    const Contact& c = contacts[static_cast<size_t>(i)];
    if (std::abs(norm(c.normal) - 1.0) > 1e-6)
      throw std::invalid_argument("contact normal is not unit length");
    Vec3 t1, t2;
    contact_frame(c.normal, t1, t2);
    for (int j = 0; j < 8; ++j) {
      double phi = 2.0 * 3.14159265358979323846 * j / 8.0;
      Vec3 edge = c.normal + opts.friction * (std::cos(phi) * t1 + std::sin(phi) * t2);
      Vec3 torque = cross(c.position, edge);
      int col = 8 * i + j;
      a[static_cast<size_t>(0) * n + col] = edge.x;
      a[static_cast<size_t>(1) * n + col] = edge.y;
      a[static_cast<size_t>(2) * n + col] = edge.z;
      a[static_cast<size_t>(3) * n + col] = torque.x;
      a[static_cast<size_t>(4) * n + col] = torque.y;
      a[static_cast<size_t>(5) * n + col] = torque.z;
      a[static_cast<size_t>(6) * n + col] = 1.0;  // budget row
    }
  }
  a[static_cast<size_t>(6) * n + (n - 1)] = 1.0;  // budget slack
  double weight = mass_kg * opts.gravity;
  b[0] = weight * u.x;
  b[1] = weight * u.y;
  b[2] = weight * u.z;
  b[6] = opts.total_normal_budget;

  // Scale each row to unit maximum magnitude so the simplex tolerances are
  // meaningful regardless of force/torque units.
  for (int r = 0; r < m; ++r) {
    double mx = std::abs(b[static_cast<size_t>(r)]);
    for (int c = 0; c < n; ++c) mx = std::max(mx, std::abs(a[static_cast<size_t>(r) * n + c]));
    if (mx < 1e-12) continue;
    for (int c = 0; c < n; ++c) a[static_cast<size_t>(r) * n + c] /= mx;
    b[static_cast<size_t>(r)] /= mx;
  }

  Phase1 lp(a, b, m, n);
  double obj = lp.solve();
  if (obj > 1e-8) return cert;
  cert.feasible = true;
  cert.edge_forces.assign(static_cast<size_t>(8 * k), 0.0);
  for (int r = 0; r < m; ++r) {
    int v = lp.basis[static_cast<size_t>(r)];
    if (v < 8 * k) cert.edge_forces[static_cast<size_t>(v)] = lp.at(r, n + m);
  }
  return cert;
}

bool can_resist_gravity(const std::vector<Contact>& contacts, double mass_kg, const Vec3& up,
                        const GravityCheckOptions& opts) {
  return resist_gravity_certificate(contacts, mass_kg, up, opts).feasible;
}

}  // namespace graspgen
