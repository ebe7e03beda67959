#include "graspgen/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace graspgen {
namespace {

constexpr double kLogvarLimit = 10.0;
constexpr double kQuatNormFloor = 1e-12;

struct Shape {
  int in = 0;
  int out = 0;
  std::size_t off = 0;
};

// Offsets of every dense layer inside the flat parameter vector. Weights
// are row-major [out][in] at off, the bias vector follows. The encoder
// concatenation order is position, orientation, spread, table; the
// decoder input concatenation is latent, table.
struct Layout {
  Shape e_pos1, e_pos2, e_ori1, e_ori2, e_spr1, e_spr2, e_tab1, e_tab2;
  Shape e_main1, e_main2, e_mean, e_logvar;
  Shape d_lat1, d_lat2, d_tab1, d_tab2;
  Shape d_main1, d_main2;
  Shape d_pos1, d_pos2, d_ori1, d_ori2, d_spr1, d_spr2, d_qual1, d_qual2;
  bool has_quality = false;
  int S = 0, H1 = 0, H2 = 0;
  std::size_t total = 0;
};

Layout build_layout(ModelKind kind, const ArchSpec& arch) {
  if (arch.subnet_width < 1 || arch.encoder_hidden1 < 1 || arch.encoder_hidden2 < 1) {
    throw std::invalid_argument("network widths must be at least 1");
  }
  Layout L;
  L.S = arch.subnet_width;
  L.H1 = arch.encoder_hidden1;
  L.H2 = arch.encoder_hidden2;
  L.has_quality = kind == ModelKind::qgg;
  std::size_t off = 0;
  auto alloc = [&off](int in, int out) {
    Shape s{in, out, off};
    off += static_cast<std::size_t>(out) * in + out;
    return s;
  };
  const int S = L.S;
  L.e_pos1 = alloc(3, S);
  L.e_pos2 = alloc(S, S);
  L.e_ori1 = alloc(4, S);
  L.e_ori2 = alloc(S, S);
  L.e_spr1 = alloc(1, S);
  L.e_spr2 = alloc(S, S);
  L.e_tab1 = alloc(4, S);
  L.e_tab2 = alloc(S, S);
  L.e_main1 = alloc(4 * S, L.H1);
  L.e_main2 = alloc(L.H1, L.H2);
  L.e_mean = alloc(L.H2, 1);
  L.e_logvar = alloc(L.H2, 1);
  L.d_lat1 = alloc(1, S);
  L.d_lat2 = alloc(S, S);
  L.d_tab1 = alloc(4, S);
  L.d_tab2 = alloc(S, S);
  L.d_main1 = alloc(2 * S, L.H1);
  L.d_main2 = alloc(L.H1, 4 * S);
  L.d_pos1 = alloc(4 * S, S);
  L.d_pos2 = alloc(S, 3);
  L.d_ori1 = alloc(4 * S, S);
  L.d_ori2 = alloc(S, 4);
  L.d_spr1 = alloc(4 * S, S);
  L.d_spr2 = alloc(S, 1);
  if (L.has_quality) {
    L.d_qual1 = alloc(4 * S, S);
    L.d_qual2 = alloc(S, 1);
  }
  L.total = off;
  return L;
}

std::vector<const Shape*> layout_order(const Layout& L) {
  std::vector<const Shape*> v = {
      &L.e_pos1, &L.e_pos2, &L.e_ori1, &L.e_ori2, &L.e_spr1, &L.e_spr2,
      &L.e_tab1, &L.e_tab2, &L.e_main1, &L.e_main2, &L.e_mean, &L.e_logvar,
      &L.d_lat1, &L.d_lat2, &L.d_tab1, &L.d_tab2, &L.d_main1, &L.d_main2,
      &L.d_pos1, &L.d_pos2, &L.d_ori1, &L.d_ori2, &L.d_spr1, &L.d_spr2};
  if (L.has_quality) {
    v.push_back(&L.d_qual1);
    v.push_back(&L.d_qual2);
  }
  return v;
}

void dense_forward(const double* p, const Shape& s, const double* x, double* y) {
  const double* w = p + s.off;
  const double* b = w + static_cast<std::size_t>(s.out) * s.in;
  for (int o = 0; o < s.out; ++o) {
    const double* row = w + static_cast<std::size_t>(o) * s.in;
    double acc = b[o];
    for (int i = 0; i < s.in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// Accumulates into grad and (when dx != nullptr) into dx; callers zero
// dx before the first layer that feeds it.
void dense_backward(const double* p, const Shape& s, const double* x, const double* dy,
                    double* dx, double* grad) {
  const double* w = p + s.off;
  double* gw = grad + s.off;
  double* gb = gw + static_cast<std::size_t>(s.out) * s.in;
  for (int o = 0; o < s.out; ++o) {
    const double d = dy[o];
    gb[o] += d;
    const double* row = w + static_cast<std::size_t>(o) * s.in;
    double* grow = gw + static_cast<std::size_t>(o) * s.in;
    for (int i = 0; i < s.in; ++i) {
      grow[i] += d * x[i];
      if (dx) dx[i] += row[i] * d;
    }
  }
}

void tanh_inplace(double* v, int n) {
  for (int i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Activations of one record's full forward pass, kept for backprop.
struct Scratch {
  std::vector<double> sub1, z, e1, e2;
  std::vector<double> u1, t1, d0, d1, d2, og;
  double rg[9] = {0};
  double y[9] = {0};
  double mean = 0, logvar_raw = 0, logvar = 0, lat = 0, n_ori = 0;

  std::vector<double> dd2, dd1, dd0, du1, dt1, de2, de1, dz, dsub1, dog;

  void init(const Layout& L) {
    const int S = L.S;
    sub1.assign(4 * S, 0.0);
    z.assign(4 * S, 0.0);
    e1.assign(L.H1, 0.0);
    e2.assign(L.H2, 0.0);
    u1.assign(S, 0.0);
    t1.assign(S, 0.0);
    d0.assign(2 * S, 0.0);
    d1.assign(L.H1, 0.0);
    d2.assign(4 * S, 0.0);
    og.assign(4 * S, 0.0);
    dd2.assign(4 * S, 0.0);
    dd1.assign(L.H1, 0.0);
    dd0.assign(2 * S, 0.0);
    du1.assign(S, 0.0);
    dt1.assign(S, 0.0);
    de2.assign(L.H2, 0.0);
    de1.assign(L.H1, 0.0);
    dz.assign(4 * S, 0.0);
    dsub1.assign(S, 0.0);
    dog.assign(S, 0.0);
  }
};

struct OutGroup {
  const Shape* l1;
  const Shape* l2;
  int k;       // output components
  int y_off;   // slot in Scratch::rg / Scratch::y
  bool is_quat;
};

std::vector<OutGroup> out_groups(const Layout& L) {
  std::vector<OutGroup> g = {{&L.d_pos1, &L.d_pos2, 3, 0, false},
                             {&L.d_ori1, &L.d_ori2, 4, 3, true},
                             {&L.d_spr1, &L.d_spr2, 1, 7, false}};
  if (L.has_quality) g.push_back({&L.d_qual1, &L.d_qual2, 1, 8, false});
  return g;
}

void encoder_forward(const double* p, const Layout& L, const double* x, Scratch& s) {
  const int S = L.S;
  const Shape* sub1[4] = {&L.e_pos1, &L.e_ori1, &L.e_spr1, &L.e_tab1};
  const Shape* sub2[4] = {&L.e_pos2, &L.e_ori2, &L.e_spr2, &L.e_tab2};
  const double* gx[4] = {x + 0, x + 3, x + 7, x + 8};
  for (int g = 0; g < 4; ++g) {
    dense_forward(p, *sub1[g], gx[g], s.sub1.data() + g * S);
    tanh_inplace(s.sub1.data() + g * S, S);
    dense_forward(p, *sub2[g], s.sub1.data() + g * S, s.z.data() + g * S);
    tanh_inplace(s.z.data() + g * S, S);
  }
  dense_forward(p, L.e_main1, s.z.data(), s.e1.data());
  tanh_inplace(s.e1.data(), L.H1);
  dense_forward(p, L.e_main2, s.e1.data(), s.e2.data());
  tanh_inplace(s.e2.data(), L.H2);
  dense_forward(p, L.e_mean, s.e2.data(), &s.mean);
  dense_forward(p, L.e_logvar, s.e2.data(), &s.logvar_raw);
  s.logvar = std::clamp(s.logvar_raw, -kLogvarLimit, kLogvarLimit);
}

void decoder_forward(const double* p, const Layout& L, double lat, const double* x_tab,
                     Scratch& s) {
  const int S = L.S;
  s.lat = lat;
  dense_forward(p, L.d_lat1, &lat, s.u1.data());
  tanh_inplace(s.u1.data(), S);
  dense_forward(p, L.d_lat2, s.u1.data(), s.d0.data());
  tanh_inplace(s.d0.data(), S);
  dense_forward(p, L.d_tab1, x_tab, s.t1.data());
  tanh_inplace(s.t1.data(), S);
  dense_forward(p, L.d_tab2, s.t1.data(), s.d0.data() + S);
  tanh_inplace(s.d0.data() + S, S);
  dense_forward(p, L.d_main1, s.d0.data(), s.d1.data());
  tanh_inplace(s.d1.data(), L.H1);
  dense_forward(p, L.d_main2, s.d1.data(), s.d2.data());
  tanh_inplace(s.d2.data(), 4 * S);
  const auto groups = out_groups(L);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const OutGroup& g = groups[gi];
    double* o = s.og.data() + gi * S;
    dense_forward(p, *g.l1, s.d2.data(), o);
    tanh_inplace(o, S);
    dense_forward(p, *g.l2, o, s.rg + g.y_off);
    if (g.is_quat) {
      double n2 = 0;
      for (int i = 0; i < 4; ++i) n2 += s.rg[g.y_off + i] * s.rg[g.y_off + i];
      s.n_ori = std::sqrt(n2);
      if (s.n_ori < kQuatNormFloor) {
        throw std::runtime_error(
            "decoder produced a degenerate raw quaternion (norm below 1e-12); "
            "resample the latent");
      }
      for (int i = 0; i < 4; ++i) s.y[g.y_off + i] = s.rg[g.y_off + i] / s.n_ori;
    } else {
      for (int i = 0; i < g.k; ++i) s.y[g.y_off + i] = sigmoid(s.rg[g.y_off + i]);
    }
  }
}

struct Targets {
  const std::array<double, 12>* x;
  double quality;  // NaN when absent
};

// Forward, loss accumulation and (optionally) backprop for one record.
// Loss sums are raw squared-error sums per group; the caller divides by
// component count times batch size.
struct RecordSums {
  double pos = 0, ori = 0, spr = 0, qual = 0, kl = 0, kl_floored = 0;
};

RecordSums record_pass(const double* p, const Layout& L, const Targets& t, double eps_val,
                       bool sample, double kl_weight, double kl_free, std::size_t batch,
                       Scratch& s, double* grad) {
  const double* x = t.x->data();
  encoder_forward(p, L, x, s);
  const double lat =
      sample ? s.mean + std::exp(0.5 * s.logvar) * eps_val : s.mean;
  decoder_forward(p, L, lat, x + 8, s);

  RecordSums sums;
  const double tgt[9] = {x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7],
                         L.has_quality ? t.quality : 0.0};
  for (int i = 0; i < 3; ++i) sums.pos += (s.y[i] - tgt[i]) * (s.y[i] - tgt[i]);
  for (int i = 3; i < 7; ++i) sums.ori += (s.y[i] - tgt[i]) * (s.y[i] - tgt[i]);
  sums.spr = (s.y[7] - tgt[7]) * (s.y[7] - tgt[7]);
  if (L.has_quality) sums.qual = (s.y[8] - tgt[8]) * (s.y[8] - tgt[8]);
  sums.kl = -0.5 * (1.0 + s.logvar - s.mean * s.mean - std::exp(s.logvar));
  sums.kl_floored = std::max(sums.kl, kl_free);
  if (!grad) return sums;

  const int S = L.S;
  const double B = static_cast<double>(batch);
  // Each scalar output carries its own batch-averaged squared error and
  // the total sums them, so every component shares one weight.
  const double scale[4] = {2.0 / B, 2.0 / B, 2.0 / B, 2.0 / B};

  std::fill(s.dd2.begin(), s.dd2.end(), 0.0);
  const auto groups = out_groups(L);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const OutGroup& g = groups[gi];
    double dy[4];
    for (int i = 0; i < g.k; ++i) {
      dy[i] = scale[gi] * (s.y[g.y_off + i] - tgt[g.y_off + i]);
    }
    double dr[4];
    if (g.is_quat) {
      double dot = 0;
      for (int i = 0; i < 4; ++i) dot += s.y[g.y_off + i] * dy[i];
      for (int i = 0; i < 4; ++i) dr[i] = (dy[i] - s.y[g.y_off + i] * dot) / s.n_ori;
    } else {
      for (int i = 0; i < g.k; ++i) {
        const double yv = s.y[g.y_off + i];
        dr[i] = dy[i] * yv * (1.0 - yv);
      }
    }
    const double* o = s.og.data() + gi * S;
    std::fill(s.dog.begin(), s.dog.end(), 0.0);
    dense_backward(p, *g.l2, o, dr, s.dog.data(), grad);
    for (int i = 0; i < S; ++i) s.dog[i] *= 1.0 - o[i] * o[i];
    dense_backward(p, *g.l1, s.d2.data(), s.dog.data(), s.dd2.data(), grad);
  }

  for (int i = 0; i < 4 * S; ++i) s.dd2[i] *= 1.0 - s.d2[i] * s.d2[i];
  std::fill(s.dd1.begin(), s.dd1.end(), 0.0);
  dense_backward(p, L.d_main2, s.d1.data(), s.dd2.data(), s.dd1.data(), grad);
  for (int i = 0; i < L.H1; ++i) s.dd1[i] *= 1.0 - s.d1[i] * s.d1[i];
  std::fill(s.dd0.begin(), s.dd0.end(), 0.0);
  dense_backward(p, L.d_main1, s.d0.data(), s.dd1.data(), s.dd0.data(), grad);

  // Latent-subnet branch down to the scalar latent.
  for (int i = 0; i < S; ++i) s.dd0[i] *= 1.0 - s.d0[i] * s.d0[i];
  std::fill(s.du1.begin(), s.du1.end(), 0.0);
  dense_backward(p, L.d_lat2, s.u1.data(), s.dd0.data(), s.du1.data(), grad);
  for (int i = 0; i < S; ++i) s.du1[i] *= 1.0 - s.u1[i] * s.u1[i];
  double dlat = 0;
  dense_backward(p, L.d_lat1, &s.lat, s.du1.data(), &dlat, grad);

  // Conditioning branch; the plane is an input, its gradient is dropped.
  for (int i = 0; i < S; ++i) {
    s.dd0[S + i] *= 1.0 - s.d0[S + i] * s.d0[S + i];
  }
  std::fill(s.dt1.begin(), s.dt1.end(), 0.0);
  dense_backward(p, L.d_tab2, s.t1.data(), s.dd0.data() + S, s.dt1.data(), grad);
  for (int i = 0; i < S; ++i) s.dt1[i] *= 1.0 - s.t1[i] * s.t1[i];
  dense_backward(p, L.d_tab1, x + 8, s.dt1.data(), nullptr, grad);

  double dmean = dlat;
  double dlogvar = sample ? dlat * eps_val * 0.5 * std::exp(0.5 * s.logvar) : 0.0;
  if (sums.kl > kl_free) {
    dmean += kl_weight * s.mean / B;
    dlogvar += kl_weight * (std::exp(s.logvar) - 1.0) / (2.0 * B);
  }
  const double dlogvar_raw =
      std::abs(s.logvar_raw) < kLogvarLimit ? dlogvar : 0.0;

  std::fill(s.de2.begin(), s.de2.end(), 0.0);
  dense_backward(p, L.e_mean, s.e2.data(), &dmean, s.de2.data(), grad);
  dense_backward(p, L.e_logvar, s.e2.data(), &dlogvar_raw, s.de2.data(), grad);
  for (int i = 0; i < L.H2; ++i) s.de2[i] *= 1.0 - s.e2[i] * s.e2[i];
  std::fill(s.de1.begin(), s.de1.end(), 0.0);
  dense_backward(p, L.e_main2, s.e1.data(), s.de2.data(), s.de1.data(), grad);
  for (int i = 0; i < L.H1; ++i) s.de1[i] *= 1.0 - s.e1[i] * s.e1[i];
  std::fill(s.dz.begin(), s.dz.end(), 0.0);
  dense_backward(p, L.e_main1, s.z.data(), s.de1.data(), s.dz.data(), grad);

  const Shape* sub1[4] = {&L.e_pos1, &L.e_ori1, &L.e_spr1, &L.e_tab1};
  const Shape* sub2[4] = {&L.e_pos2, &L.e_ori2, &L.e_spr2, &L.e_tab2};
  const double* gx[4] = {x + 0, x + 3, x + 7, x + 8};
  for (int g = 0; g < 4; ++g) {
    double* dz_g = s.dz.data() + g * S;
    const double* z_g = s.z.data() + g * S;
    for (int i = 0; i < S; ++i) dz_g[i] *= 1.0 - z_g[i] * z_g[i];
    std::fill(s.dsub1.begin(), s.dsub1.end(), 0.0);
    dense_backward(p, *sub2[g], s.sub1.data() + g * S, dz_g, s.dsub1.data(), grad);
    const double* a1 = s.sub1.data() + g * S;
    for (int i = 0; i < S; ++i) s.dsub1[i] *= 1.0 - a1[i] * a1[i];
    dense_backward(p, *sub1[g], gx[g], s.dsub1.data(), nullptr, grad);
  }
  return sums;
}

LossBreakdown batch_loss(const VaeModel& model, const Layout& L,
                         const std::vector<Targets>& batch, const double* eps,
                         double kl_weight, double kl_free, double* grad, Scratch& s) {
  const double* p = model.params.data();
  const std::size_t B = batch.size();
  RecordSums acc;
  for (std::size_t i = 0; i < B; ++i) {
    RecordSums r = record_pass(p, L, batch[i], eps ? eps[i] : 0.0, eps != nullptr,
                               kl_weight, kl_free, B, s, grad);
    acc.pos += r.pos;
    acc.ori += r.ori;
    acc.spr += r.spr;
    acc.qual += r.qual;
    acc.kl += r.kl;
    acc.kl_floored += r.kl_floored;
  }
  LossBreakdown lb;
  lb.position = acc.pos / B;
  lb.orientation = acc.ori / B;
  lb.spread = acc.spr / B;
  lb.quality = L.has_quality ? acc.qual / B : 0.0;
  lb.kl = acc.kl / B;
  lb.total = lb.position + lb.orientation + lb.spread + lb.quality +
             kl_weight * (acc.kl_floored / B);
  return lb;
}

std::vector<Targets> make_targets(const VaeModel& model,
                                  const std::vector<GraspRecord>& batch,
                                  std::vector<std::array<double, 12>>& storage) {
  if (batch.empty()) throw std::invalid_argument("loss requires a non-empty batch");
  storage.resize(batch.size());
  std::vector<Targets> t(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    storage[i] = normalize(batch[i], model.stats);
    double q = std::numeric_limits<double>::quiet_NaN();
    if (model.kind == ModelKind::qgg) {
      if (!batch[i].quality) {
        throw std::invalid_argument("record " + std::to_string(i) +
                                    " has no quality value; a quality-aware model "
                                    "requires one on every record");
      }
      q = *batch[i].quality;
    }
    t[i] = Targets{&storage[i], q};
  }
  return t;
}

void check_plane_unit(const PlaneEq& plane) {
  const double n = std::sqrt(plane.a * plane.a + plane.b * plane.b + plane.c * plane.c);
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw std::invalid_argument("tabletop plane normal must be unit length");
  }
}

std::string kind_token(ModelKind k) { return model_kind_name(k); }

}  // namespace

const char* model_kind_name(ModelKind k) {
  return k == ModelKind::hgg ? "hgg" : "qgg";
}

int param_count(ModelKind kind, const ArchSpec& arch) {
  return static_cast<int>(build_layout(kind, arch).total);
}

VaeModel make_model(ModelKind kind, const ArchSpec& arch, const NormStats& stats,
                    std::uint64_t seed) {
  const Layout L = build_layout(kind, arch);
  VaeModel m;
  m.kind = kind;
  m.arch = arch;
  m.stats = stats;
  m.params.assign(L.total, 0.0);
  Rng rng(seed);
  for (const Shape* s : layout_order(L)) {
    const double limit = std::sqrt(6.0 / (s->in + s->out));
    double* w = m.params.data() + s->off;
    const std::size_t nw = static_cast<std::size_t>(s->out) * s->in;
    for (std::size_t i = 0; i < nw; ++i) w[i] = rng.uniform(-limit, limit);
    // Biases stay zero.
  }
  return m;
}

Encoding encode(const VaeModel& model, const std::array<double, 12>& normalized) {
  const Layout L = build_layout(model.kind, model.arch);
  if (model.params.size() != L.total) {
    throw std::invalid_argument("parameter vector size does not match the architecture");
  }
  Scratch s;
  s.init(L);
  encoder_forward(model.params.data(), L, normalized.data(), s);
  return Encoding{s.mean, s.logvar};
}

double reparameterize(double mean, double logvar, Rng& rng) {
  const double lv = std::clamp(logvar, -kLogvarLimit, kLogvarLimit);
  return mean + std::exp(0.5 * lv) * rng.normal();
}

double kl_divergence(double mean, double logvar) {
  return -0.5 * (1.0 + logvar - mean * mean - std::exp(logvar));
}

Decoded decode(const VaeModel& model, double latent, const PlaneEq& tabletop) {
  check_plane_unit(tabletop);
  const Layout L = build_layout(model.kind, model.arch);
  if (model.params.size() != L.total) {
    throw std::invalid_argument("parameter vector size does not match the architecture");
  }
  Scratch s;
  s.init(L);
  const double x_tab[4] = {tabletop.a, tabletop.b, tabletop.c, tabletop.d};
  decoder_forward(model.params.data(), L, latent, x_tab, s);
  Decoded d;
  for (int i = 0; i < 8; ++i) d.fields[i] = s.y[i];
  d.fields[8] = tabletop.a;
  d.fields[9] = tabletop.b;
  d.fields[10] = tabletop.c;
  d.fields[11] = tabletop.d;
  if (L.has_quality) d.quality = s.y[8];
  return d;
}

LossBreakdown vae_loss(const VaeModel& model, const std::vector<GraspRecord>& batch,
                       double kl_weight) {
  const Layout L = build_layout(model.kind, model.arch);
  std::vector<std::array<double, 12>> storage;
  const std::vector<Targets> targets = make_targets(model, batch, storage);
  Scratch s;
  s.init(L);
  return batch_loss(model, L, targets, nullptr, kl_weight, 0.0, nullptr, s);
}

LossBreakdown vae_loss_grad(const VaeModel& model, const std::vector<GraspRecord>& batch,
                            const std::vector<double>& eps, double kl_weight,
                            std::vector<double>* grad) {
  if (eps.size() != batch.size()) {
    throw std::invalid_argument("one latent noise value per record is required");
  }
  const Layout L = build_layout(model.kind, model.arch);
  std::vector<std::array<double, 12>> storage;
  const std::vector<Targets> targets = make_targets(model, batch, storage);
  Scratch s;
  s.init(L);
  double* g = nullptr;
  if (grad) {
    grad->assign(L.total, 0.0);
    g = grad->data();
  }
  return batch_loss(model, L, targets, eps.data(), kl_weight, 0.0, g, s);
}

std::pair<VaeModel, std::vector<double>> train(ModelKind kind, const ArchSpec& arch,
                                               const GraspDataset& dataset,
                                               const TrainConfig& cfg) {
  if (dataset.records.size() < 2) {
    throw std::invalid_argument("training requires at least 2 records");
  }
  if (cfg.epochs <= 0 || cfg.batch_size <= 0) {
    throw std::invalid_argument("epochs and batch size must be positive");
  }
  if (!(cfg.learning_rate > 0.0) || !(cfg.kl_weight >= 0.0)) {
    throw std::invalid_argument("learning rate must be positive and KL weight non-negative");
  }
  if (!(cfg.kl_warmup_frac >= 0.0) || !(cfg.kl_warmup_frac <= 1.0)) {
    throw std::invalid_argument("KL warm-up fraction must lie in [0, 1]");
  }
  if (!(cfg.kl_free_bits >= 0.0)) {
    throw std::invalid_argument("KL free-bits floor must be non-negative");
  }
  const Layout L = build_layout(kind, arch);
  const NormStats stats = fit_norm(dataset);
  VaeModel model = make_model(kind, arch, stats, derive_seed(cfg.seed, 0xA1));

  const std::size_t n = dataset.records.size();
  std::vector<std::array<double, 12>> storage(n);
  std::vector<double> quality(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    const GraspRecord& r = dataset.records[i];
    storage[i] = normalize(r, stats);
    if (kind == ModelKind::qgg) {
      if (!r.quality) {
        throw std::invalid_argument("record " + std::to_string(i) +
                                    " has no quality value; quality-aware training "
                                    "requires one on every record");
      }
      quality[i] = *r.quality;
    }
  }

  Rng rng(derive_seed(cfg.seed, 0xB2));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<double> grad(L.total, 0.0);
  std::vector<double> adam_m(L.total, 0.0);
  std::vector<double> adam_v(L.total, 0.0);
  std::vector<double> history;
  history.reserve(cfg.epochs);
  Scratch scratch;
  scratch.init(L);
  std::vector<Targets> batch;
  std::vector<double> eps;
  long step = 0;

  const double warmup_epochs = std::ceil(cfg.kl_warmup_frac * cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double kl_w =
        warmup_epochs > 0.0
            ? cfg.kl_weight * std::min(1.0, static_cast<double>(epoch + 1) / warmup_epochs)
            : cfg.kl_weight;
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = rng.index(i + 1);
      std::swap(order[i], order[j]);
    }
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(n, b0 + cfg.batch_size);
      batch.clear();
      eps.clear();
      for (std::size_t i = b0; i < b1; ++i) {
        batch.push_back(Targets{&storage[order[i]], quality[order[i]]});
        eps.push_back(rng.normal());
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossBreakdown lb =
          batch_loss(model, L, batch, eps.data(), kl_w, cfg.kl_free_bits, grad.data(), scratch);
      loss_sum += lb.total * static_cast<double>(b1 - b0);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < L.total; ++k) {
        adam_m[k] = cfg.adam_beta1 * adam_m[k] + (1.0 - cfg.adam_beta1) * grad[k];
        adam_v[k] = cfg.adam_beta2 * adam_v[k] + (1.0 - cfg.adam_beta2) * grad[k] * grad[k];
        const double mh = adam_m[k] / c1;
        const double vh = adam_v[k] / c2;
        model.params[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_epsilon);
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1) +
                               ": loss is not finite");
    }
    history.push_back(epoch_loss);
  }
  return {std::move(model), std::move(history)};
}

std::vector<GraspRecord> sample_grasps(const VaeModel& model, const StablePose& stable,
                                       int n, SampleMode mode, Rng& rng, double sweep_lo,
                                       double sweep_hi) {
  if (n < 0) throw std::invalid_argument("sample count must be non-negative");
  if (mode == SampleMode::sweep && !(sweep_lo <= sweep_hi)) {
    throw std::invalid_argument("sweep range must satisfy lo <= hi");
  }
  std::vector<GraspRecord> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double lat;
    if (mode == SampleMode::prior) {
      lat = rng.normal();
    } else if (n == 1) {
      lat = 0.5 * (sweep_lo + sweep_hi);
    } else {
      lat = sweep_lo + (sweep_hi - sweep_lo) * static_cast<double>(i) /
                           static_cast<double>(n - 1);
    }
    const Decoded d = decode(model, lat, stable.tabletop_plane_obj);
    GraspRecord r = denormalize(d.fields, model.stats);
    r.stable_pose_id = stable.id;
    r.quality = d.quality;
    out.push_back(r);
  }
  return out;
}

void save_model(const VaeModel& model, const std::string& path) {
  const Layout L = build_layout(model.kind, model.arch);
  if (model.params.size() != L.total) {
    throw std::invalid_argument("parameter vector size does not match the architecture");
  }
  nlohmann::json j;
  j["format"] = "graspgen-vae";
  j["version"] = 1;
  j["kind"] = kind_token(model.kind);
  j["arch"] = {{"subnet_width", model.arch.subnet_width},
               {"encoder_hidden1", model.arch.encoder_hidden1},
               {"encoder_hidden2", model.arch.encoder_hidden2}};
  j["stats"] = {{"lo", model.stats.lo}, {"hi", model.stats.hi}};
  j["params"] = model.params;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump();
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

VaeModel load_model(const std::string& path, std::optional<ModelKind> require) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open model file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": corrupt model file: " + e.what());
  }
  auto corrupt = [&path](const std::string& what) {
    return std::runtime_error(path + ": corrupt model file: " + what);
  };
  try {
    if (j.value("format", "") != "graspgen-vae") throw corrupt("unrecognized format tag");
    if (j.value("version", -1) != 1) {
      throw std::runtime_error(path + ": unsupported model file version");
    }
    const std::string kind_str = j.at("kind").get<std::string>();
    VaeModel m;
    if (kind_str == "hgg") {
      m.kind = ModelKind::hgg;
    } else if (kind_str == "qgg") {
      m.kind = ModelKind::qgg;
    } else {
      throw corrupt("unknown model kind '" + kind_str + "'");
    }
    const nlohmann::json& a = j.at("arch");
    m.arch.subnet_width = a.at("subnet_width").get<int>();
    m.arch.encoder_hidden1 = a.at("encoder_hidden1").get<int>();
    m.arch.encoder_hidden2 = a.at("encoder_hidden2").get<int>();
    const Layout L = build_layout(m.kind, m.arch);
    const nlohmann::json& st = j.at("stats");
    const auto lo = st.at("lo").get<std::vector<double>>();
    const auto hi = st.at("hi").get<std::vector<double>>();
    if (lo.size() != 4 || hi.size() != 4) throw corrupt("normalization stats must have 4 fields");
    for (int i = 0; i < 4; ++i) {
      if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(hi[i] > lo[i])) {
        throw corrupt("invalid normalization range");
      }
      m.stats.lo[i] = lo[i];
      m.stats.hi[i] = hi[i];
    }
    m.params = j.at("params").get<std::vector<double>>();
    if (m.params.size() != L.total) {
      throw corrupt("parameter count " + std::to_string(m.params.size()) +
                    " does not match the architecture (" + std::to_string(L.total) + ")");
    }
    for (double v : m.params) {
      if (!std::isfinite(v)) throw corrupt("non-finite parameter");
    }
    if (require && *require != m.kind) {
      throw std::runtime_error(path + ": model architecture mismatch: file holds a " +
                               kind_token(m.kind) + " model, " + kind_token(*require) +
                               " required");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": corrupt model file: " + e.what());
  }
}

}  // namespace graspgen
