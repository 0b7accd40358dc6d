#include "thz/deconv.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "thz/parallel.hpp"

namespace thz {

namespace {

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// For every output index s, the positions p in [-r, n - 1 + r] that reflect onto s.
std::vector<std::vector<std::ptrdiff_t>> reflection_preimages(std::size_t n, std::size_t r) {
  const auto N = static_cast<std::ptrdiff_t>(n), R = static_cast<std::ptrdiff_t>(r);
  std::vector<std::vector<std::ptrdiff_t>> pre(n);
  for (std::ptrdiff_t p = -R; p <= N - 1 + R; ++p) pre[static_cast<std::size_t>(reflect_index(p, N))].push_back(p);
  return pre;
}

void require_same_shape(const Image& a, const Image& b) {
  if (a.nx() != b.nx() || a.ny() != b.ny()) throw std::invalid_argument("image sizes differ");
}

double sum_abs_gradient(const Image& u) {
  double tv = 0.0;
  for (std::size_t y = 0; y < u.ny(); ++y)
    for (std::size_t x = 0; x < u.nx(); ++x) {
      if (x + 1 < u.nx()) tv += std::abs(u(x + 1, y) - u(x, y));
      if (y + 1 < u.ny()) tv += std::abs(u(x, y + 1) - u(x, y));
    }
  return tv;
}

Image scaled(const Image& img, double s) {
  Image out = img;
  for (double& v : out.values()) v *= s;
  return out;
}

// Euclidean projection onto {k >= 0, sum k = 1}.
void project_simplex(Eigen::VectorXd& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  v = (v.array() - theta).cwiseMax(0.0);
}

// Resizes the kernel support to `size` taps and stretches it by `scale` about the centre
// (the same factor the image grows by), bilinear, zero outside the old support.
Kernel resample_kernel(const Kernel& k, std::size_t size, double scale, double ox = 0.0, double oy = 0.0) {
  const auto r_new = static_cast<std::ptrdiff_t>(size / 2);
  const double r_old = static_cast<double>(k.radius());
  auto tap = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
    const auto r = static_cast<std::ptrdiff_t>(k.radius());
    return (std::abs(x) > r || std::abs(y) > r) ? 0.0 : k.at(x, y);
  };
  std::vector<double> v(size * size, 0.0);
  for (std::ptrdiff_t y = -r_new; y <= r_new; ++y)
    for (std::ptrdiff_t x = -r_new; x <= r_new; ++x) {
      const double fx = static_cast<double>(x) / scale + ox, fy = static_cast<double>(y) / scale + oy;
      if (std::abs(fx) > r_old + 1.0 || std::abs(fy) > r_old + 1.0) continue;
      const double x0 = std::floor(fx), y0 = std::floor(fy);
      const double wx = fx - x0, wy = fy - y0;
      const auto ix = static_cast<std::ptrdiff_t>(x0), iy = static_cast<std::ptrdiff_t>(y0);
      v[static_cast<std::size_t>((y + r_new) * static_cast<std::ptrdiff_t>(size) + x + r_new)] =
          (1 - wy) * ((1 - wx) * tap(ix, iy) + wx * tap(ix + 1, iy)) +
          wy * ((1 - wx) * tap(ix, iy + 1) + wx * tap(ix + 1, iy + 1));
    }
  if (std::all_of(v.begin(), v.end(), [](double t) { return t == 0.0; })) return delta_kernel(size);
  return Kernel(size, std::move(v));
}

// Bilinear shift putting the centroid on the centre tap.
Kernel center_subpixel(const Kernel& k) {
  const auto r = static_cast<std::ptrdiff_t>(k.radius());
  double cx = 0.0, cy = 0.0;
  for (std::ptrdiff_t y = -r; y <= r; ++y)
    for (std::ptrdiff_t x = -r; x <= r; ++x) {
      cx += k.at(x, y) * static_cast<double>(x);
      cy += k.at(x, y) * static_cast<double>(y);
    }
  if (std::abs(cx) < 1e-9 && std::abs(cy) < 1e-9) return k;
  return resample_kernel(k, k.size(), 1.0, cx, cy);
}

std::size_t odd_at_least_3(double v) {
  auto n = static_cast<std::size_t>(std::llround(v));
  if (n % 2 == 0) ++n;
  return std::max<std::size_t>(n, 3);
}

// Forward differences, zero on the last column / row.
void forward_gradient(const Image& u, Image& gx, Image& gy) {
  gx = Image(u.nx(), u.ny());
  gy = Image(u.nx(), u.ny());
  for (std::size_t y = 0; y < u.ny(); ++y)
    for (std::size_t x = 0; x < u.nx(); ++x) {
      if (x + 1 < u.nx()) gx(x, y) = u(x + 1, y) - u(x, y);
      if (y + 1 < u.ny()) gy(x, y) = u(x, y + 1) - u(x, y);
    }
}

// Negative adjoint of forward_gradient.
Image divergence(const Image& px, const Image& py) {
  const std::size_t nx = px.nx(), ny = px.ny();
  Image d(nx, ny);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      double v = 0.0;
      if (x + 1 < nx) v += px(x, y);
      if (x > 0) v -= px(x - 1, y);
      if (y + 1 < ny) v += py(x, y);
      if (y > 0) v -= py(x, y - 1);
      d(x, y) = v;
    }
  return d;
}

double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

// Shock filter u <- u - dt sign(lap u) |grad u| with minmod gradients and replicated borders.
Image shock_filter(Image u, int iters, double dt) {
  const auto nx = static_cast<std::ptrdiff_t>(u.nx()), ny = static_cast<std::ptrdiff_t>(u.ny());
  auto at = [&](const Image& im, std::ptrdiff_t x, std::ptrdiff_t y) {
    x = std::clamp<std::ptrdiff_t>(x, 0, nx - 1);
    y = std::clamp<std::ptrdiff_t>(y, 0, ny - 1);
    return im(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  };
  for (int it = 0; it < iters; ++it) {
    Image next(u.nx(), u.ny());
    for (std::ptrdiff_t y = 0; y < ny; ++y)
      for (std::ptrdiff_t x = 0; x < nx; ++x) {
        const double c = at(u, x, y);
        const double ux = minmod(at(u, x + 1, y) - c, c - at(u, x - 1, y));
        const double uy = minmod(at(u, x, y + 1) - c, c - at(u, x, y - 1));
        const double lap = at(u, x + 1, y) + at(u, x - 1, y) + at(u, x, y + 1) + at(u, x, y - 1) - 4.0 * c;
        const double s = lap > 0.0 ? 1.0 : (lap < 0.0 ? -1.0 : 0.0);
        next(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = c - dt * s * std::hypot(ux, uy);
      }
    u = std::move(next);
  }
  return u;
}

double quantile(std::vector<double> v, double q) {
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

// Least-squares kernel mapping the selected predicted gradients onto the observed ones,
// min ||k * P - F||^2 + gamma ||k||^2 summed over both directions with zero extension,
// then clipped, small entries dropped and renormalized. Returns `fallback` if nothing survives.
Kernel kernel_from_edges(const Image& px, const Image& py, const Image& fx, const Image& fy,
                         std::size_t size, const Kernel& fallback) {
  const auto nx = static_cast<std::ptrdiff_t>(px.nx()), ny = static_cast<std::ptrdiff_t>(px.ny());
  const auto r = static_cast<std::ptrdiff_t>(size / 2);
  const auto m = static_cast<std::ptrdiff_t>(size);
  const std::ptrdiff_t span = 2 * m - 1;
  std::vector<double> autocorr(static_cast<std::size_t>(span * span), 0.0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m * m);

  for (const auto* pair : {&px, &py}) {
    const Image& P = *pair;
    const Image& F = pair == &px ? fx : fy;
    for (std::ptrdiff_t y = 0; y < ny; ++y)
      for (std::ptrdiff_t x = 0; x < nx; ++x) {
        const double p = P(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
        if (p == 0.0) continue;
        for (std::ptrdiff_t dy = -(m - 1); dy <= m - 1; ++dy) {
          const std::ptrdiff_t yy = y + dy;
          if (yy < 0 || yy >= ny) continue;
          for (std::ptrdiff_t dx = -(m - 1); dx <= m - 1; ++dx) {
            const std::ptrdiff_t xx = x + dx;
            if (xx < 0 || xx >= nx) continue;
            autocorr[static_cast<std::size_t>((dy + m - 1) * span + dx + m - 1)] +=
                p * P(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy));
          }
        }
        // rhs(a) = sum_y P(y) F(y + a)
        for (std::ptrdiff_t ay = -r; ay <= r; ++ay) {
          const std::ptrdiff_t yy = y + ay;
          if (yy < 0 || yy >= ny) continue;
          for (std::ptrdiff_t ax = -r; ax <= r; ++ax) {
            const std::ptrdiff_t xx = x + ax;
            if (xx < 0 || xx >= nx) continue;
            rhs[(ay + r) * m + ax + r] += p * F(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy));
          }
        }
      }
  }

  Eigen::MatrixXd Q(m * m, m * m);
  for (std::ptrdiff_t a = 0; a < m * m; ++a)
    for (std::ptrdiff_t b = 0; b < m * m; ++b) {
      const std::ptrdiff_t dx = (a % m) - (b % m), dy = (a / m) - (b / m);
      Q(a, b) = autocorr[static_cast<std::size_t>((dy + m - 1) * span + dx + m - 1)];
    }
  Q.diagonal().array() += 1e-3;
  Eigen::VectorXd k = Q.ldlt().solve(rhs);
  if (!k.allFinite()) return fallback;
  k = k.cwiseMax(0.0);
  const double peak = k.maxCoeff();
  if (!(peak > 0.0)) return fallback;
  for (Eigen::Index i = 0; i < k.size(); ++i)
    if (k[i] < 0.05 * peak) k[i] = 0.0;
  return Kernel(size, std::vector<double>(k.data(), k.data() + k.size()));
}

// IRLS on the L1 data term: weighted least squares over the unit simplex, solved by
// accelerated projected gradient from the current kernel.
Kernel kernel_step_l1(const Image& u, const Image& f, const Kernel& current, std::size_t threads) {
  const std::size_t nx = u.nx(), ny = u.ny(), size = current.size();
  const auto r = static_cast<std::ptrdiff_t>(current.radius());
  const auto npix = static_cast<Eigen::Index>(nx * ny);
  const auto nk = static_cast<Eigen::Index>(size * size);

  Eigen::MatrixXd A(npix, nk);
  parallel_for(static_cast<std::size_t>(nk), threads, [&](std::size_t col) {
    const auto tx = static_cast<std::ptrdiff_t>(col % size) - r;
    const auto ty = static_cast<std::ptrdiff_t>(col / size) - r;
    for (std::size_t y = 0; y < ny; ++y) {
      const auto sy = static_cast<std::size_t>(
          reflect_index(static_cast<std::ptrdiff_t>(y) - ty, static_cast<std::ptrdiff_t>(ny)));
      for (std::size_t x = 0; x < nx; ++x) {
        const auto sx = static_cast<std::size_t>(
            reflect_index(static_cast<std::ptrdiff_t>(x) - tx, static_cast<std::ptrdiff_t>(nx)));
        A(static_cast<Eigen::Index>(y * nx + x), static_cast<Eigen::Index>(col)) = u(sx, sy);
      }
    }
  });
  const Eigen::Map<const Eigen::VectorXd> fv(f.values().data(), npix);
  Eigen::VectorXd k = Eigen::Map<const Eigen::VectorXd>(current.values().data(), nk);

  for (int irls = 0; irls < 2; ++irls) {
    const Eigen::VectorXd res = A * k - fv;
    const Eigen::VectorXd w = res.cwiseAbs().cwiseMax(1e-3).cwiseInverse();
    const Eigen::MatrixXd WA = A.array().colwise() * w.array();
    const Eigen::MatrixXd Q = A.transpose() * WA;
    const Eigen::VectorXd b = WA.transpose() * fv;
    const double L = Q.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
    if (!(L > 0.0)) break;
    Eigen::VectorXd y = k, prev = k;
    double t = 1.0;
    for (int it = 0; it < 300; ++it) {
      Eigen::VectorXd next = y - (Q * y - b) / L;
      project_simplex(next);
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / tn) * (next - prev);
      prev = std::move(next);
      t = tn;
    }
    k = prev;
  }
  return Kernel(size, std::vector<double>(k.data(), k.data() + k.size()));
}

}  // namespace

Kernel::Kernel(std::size_t size, std::vector<double> values) : size_(size), values_(std::move(values)) {
  if (size == 0 || size % 2 == 0) throw std::invalid_argument("kernel size must be odd");
  if (values_.size() != size * size) throw std::invalid_argument("kernel value count does not match size^2");
  double s = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("kernel values must be finite and >= 0");
    s += v;
  }
  if (!(s > 0.0)) throw std::invalid_argument("kernel has zero sum");
  for (double& v : values_) v /= s;
}

double Kernel::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

Kernel delta_kernel(std::size_t size) {
  std::vector<double> v(size * size, 0.0);
  v[(size / 2) * size + size / 2] = 1.0;
  return Kernel(size, std::move(v));
}

Kernel gaussian_kernel(std::size_t size, double sigma_px) {
  if (size < 3 || size % 2 == 0) throw std::invalid_argument("gaussian kernel size must be odd and >= 3");
  if (!(sigma_px > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
  const auto r = static_cast<std::ptrdiff_t>(size / 2);
  std::vector<double> v(size * size);
  for (std::ptrdiff_t y = -r; y <= r; ++y)
    for (std::ptrdiff_t x = -r; x <= r; ++x)
      v[static_cast<std::size_t>((y + r) * static_cast<std::ptrdiff_t>(size) + x + r)] =
          std::exp(-static_cast<double>(x * x + y * y) / (2.0 * sigma_px * sigma_px));
  // Tiny sigmas underflow everywhere except the centre, which stays 1.
  return Kernel(size, std::move(v));
}

Image convolve(const Image& a, const Kernel& h, std::size_t threads) {
  const std::size_t nx = a.nx(), ny = a.ny();
  const auto r = static_cast<std::ptrdiff_t>(h.radius());
  Image out(nx, ny);
  parallel_for(ny, threads, [&](std::size_t y) {
    for (std::size_t x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t ty = -r; ty <= r; ++ty) {
        const auto sy = static_cast<std::size_t>(
            reflect_index(static_cast<std::ptrdiff_t>(y) - ty, static_cast<std::ptrdiff_t>(ny)));
        for (std::ptrdiff_t tx = -r; tx <= r; ++tx) {
          const auto sx = static_cast<std::size_t>(
              reflect_index(static_cast<std::ptrdiff_t>(x) - tx, static_cast<std::ptrdiff_t>(nx)));
          acc += h.at(tx, ty) * a(sx, sy);
        }
      }
      out(x, y) = acc;
    }
  });
  return out;
}

Image convolve_adjoint(const Image& b, const Kernel& h, std::size_t threads) {
  const std::size_t nx = b.nx(), ny = b.ny();
  const std::size_t r = h.radius();
  const auto R = static_cast<std::ptrdiff_t>(r);
  const auto pre_x = reflection_preimages(nx, r), pre_y = reflection_preimages(ny, r);
  const auto NX = static_cast<std::ptrdiff_t>(nx), NY = static_cast<std::ptrdiff_t>(ny);
  Image out(nx, ny);
  // convolve() reads a(reflect(x - t)); collect every (x, t) whose source reflects onto s.
  parallel_for(ny, threads, [&](std::size_t sy) {
    for (std::size_t sx = 0; sx < nx; ++sx) {
      double acc = 0.0;
      for (std::ptrdiff_t py : pre_y[sy])
        for (std::ptrdiff_t ty = -R; ty <= R; ++ty) {
          const std::ptrdiff_t y = py + ty;
          if (y < 0 || y >= NY) continue;
          for (std::ptrdiff_t px : pre_x[sx])
            for (std::ptrdiff_t tx = -R; tx <= R; ++tx) {
              const std::ptrdiff_t x = px + tx;
              if (x < 0 || x >= NX) continue;
              acc += h.at(tx, ty) * b(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            }
        }
      out(sx, sy) = acc;
    }
  });
  return out;
}

Image lucy_richardson_step(const Image& estimate, const Image& observed, const Kernel& h,
                           std::size_t threads) {
  require_same_shape(estimate, observed);
  const Image blurred = convolve(estimate, h, threads);
  Image ratio(observed.nx(), observed.ny());
  for (std::size_t i = 0; i < ratio.size(); ++i)
    ratio.values()[i] = observed.values()[i] / std::max(blurred.values()[i], 1e-12);
  const Image corr = convolve_adjoint(ratio, h, threads);
  Image out(estimate.nx(), estimate.ny());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = estimate.values()[i] * corr.values()[i];
  return out;
}

IntensityImage lucy_richardson(const IntensityImage& observed, const Kernel& h, std::size_t iters,
                               std::size_t threads) {
  observed.validate();
  Image u = observed;
  for (std::size_t i = 0; i < iters; ++i) u = lucy_richardson_step(u, observed, h, threads);
  return IntensityImage(std::move(u));
}

double tv_objective(const Image& sharp, const Kernel& h, const Image& observed, double lambda) {
  require_same_shape(sharp, observed);
  const Image b = convolve(sharp, h);
  double data = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) data += std::abs(b.values()[i] - observed.values()[i]);
  return data + lambda * sum_abs_gradient(sharp);
}

Image tv_l1_deconvolve(const Image& observed, const Kernel& h, double lambda, std::size_t iters,
                       const Image* init, std::size_t threads) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  const std::size_t nx = observed.nx(), ny = observed.ny(), n = observed.size();
  Image u = init ? *init : observed;
  require_same_shape(u, observed);
  Image ubar = u;
  Image p(nx, ny), qx(nx, ny), qy(nx, ny);
  // ||K||^2 <= 3 with reflected borders, ||grad||^2 <= 8.
  const double step = 0.99 / std::sqrt(11.0);
  Image gx, gy;
  for (std::size_t it = 0; it < iters; ++it) {
    const Image Ku = convolve(ubar, h, threads);
    for (std::size_t i = 0; i < n; ++i)
      p.values()[i] = std::clamp(p.values()[i] + step * (Ku.values()[i] - observed.values()[i]), -1.0, 1.0);
    forward_gradient(ubar, gx, gy);
    for (std::size_t i = 0; i < n; ++i) {
      qx.values()[i] = std::clamp(qx.values()[i] + step * gx.values()[i], -lambda, lambda);
      qy.values()[i] = std::clamp(qy.values()[i] + step * gy.values()[i], -lambda, lambda);
    }
    const Image Ktp = convolve_adjoint(p, h, threads);
    const Image dq = divergence(qx, qy);
    for (std::size_t i = 0; i < n; ++i) {
      const double prev = u.values()[i];
      const double next = std::max(0.0, prev - step * (Ktp.values()[i] - dq.values()[i]));
      u.values()[i] = next;
      ubar.values()[i] = 2.0 * next - prev;
    }
  }
  return u;
}

Image resample_bilinear(const Image& img, std::size_t nx, std::size_t ny) {
  if (nx == 0 || ny == 0 || img.empty()) throw std::invalid_argument("resample to an empty image");
  Image out(nx, ny);
  auto coord = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    if (n_out == 1) return 0.5 * static_cast<double>(n_in - 1);
    return static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
  };
  for (std::size_t y = 0; y < ny; ++y) {
    const double fy = coord(y, ny, img.ny());
    const auto y0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y1 = std::min(y0 + 1, img.ny() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < nx; ++x) {
      const double fx = coord(x, nx, img.nx());
      const auto x0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x1 = std::min(x0 + 1, img.nx() - 1);
      const double wx = fx - static_cast<double>(x0);
      out(x, y) = (1 - wy) * ((1 - wx) * img(x0, y0) + wx * img(x1, y0)) +
                  wy * ((1 - wx) * img(x0, y1) + wx * img(x1, y1));
    }
  }
  return out;
}

BlindTvResult blind_tv_deconvolve(const IntensityImage& observed, const BlindTvOptions& opts) {
  observed.validate();
  if (opts.kernel_size < 3 || opts.kernel_size % 2 == 0)
    throw std::invalid_argument("kernel size must be odd and >= 3");
  if (opts.scales == 0) throw std::invalid_argument("at least one scale is required");
  if (opts.lambda && !(*opts.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const std::size_t nx = observed.nx(), ny = observed.ny();
  if (opts.kernel_size / 2 >= std::min(nx, ny)) throw std::invalid_argument("kernel larger than the image");

  BlindTvResult res;
  const double peak = observed.max();
  res.lambda = opts.lambda.value_or(2e-3 * peak);
  if (!(peak > 0.0)) {
    res.image = observed;
    res.kernel = delta_kernel(opts.kernel_size);
    return res;
  }
  // Work on the image scaled to unit peak; the objective is 1-homogeneous so lambda scales too.
  const Image f = scaled(observed, 1.0 / peak);
  const double lam = res.lambda / peak;
  const std::size_t threads = opts.threads;
  const Kernel smooth = gaussian_kernel(5, 0.5);

  auto predict_kernel = [&](const Image& u, const Image& fx, const Image& fy, std::size_t ks, const Kernel& k) {
    const Image P = shock_filter(convolve(u, smooth, threads), 4, 0.5);
    Image px, py;
    forward_gradient(P, px, py);
    std::vector<double> mag(px.size());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(px.values()[i], py.values()[i]);
    const double thr = quantile(mag, 0.9);
    for (std::size_t i = 0; i < mag.size(); ++i)
      if (mag[i] < thr) px.values()[i] = py.values()[i] = 0.0;
    return center_subpixel(kernel_from_edges(px, py, fx, fy, ks, k));
  };

  Image u;
  Kernel k;
  bool started = false;
  for (std::size_t level = opts.scales; level-- > 0;) {
    const double ratio = std::pow(std::sqrt(2.0), static_cast<double>(level));
    const std::size_t lnx = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(nx / ratio)));
    const std::size_t lny = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ny / ratio)));
    const std::size_t ks = level == 0 ? opts.kernel_size
                                      : std::min(opts.kernel_size, odd_at_least_3(opts.kernel_size / ratio));
    if (ks / 2 >= std::min(lnx, lny)) continue;  // too coarse for this kernel
    const Image fs = level == 0 ? f : resample_bilinear(f, lnx, lny);
    if (!started) {
      u = fs;
      k = delta_kernel(ks);
      started = true;
    } else {
      const double grow = static_cast<double>(lnx - 1) / static_cast<double>(u.nx() - 1);
      u = resample_bilinear(u, lnx, lny);
      k = resample_kernel(k, ks, grow);
    }
    Image fx, fy;
    forward_gradient(fs, fx, fy);
    for (std::size_t t = 0; t < opts.alternations; ++t) {
      k = predict_kernel(u, fx, fy, ks, k);
      u = tv_l1_deconvolve(fs, k, lam, opts.inner_iters, &u, threads);
    }
  }

  // Full resolution: alternate image and kernel steps on the objective itself; a step is
  // kept only if the objective does not rise.
  double energy = tv_objective(u, k, f, lam);
  res.objective.push_back(energy);
  for (std::size_t t = 0; t < opts.refinements; ++t) {
    Image u_new = tv_l1_deconvolve(f, k, lam, opts.inner_iters, &u, threads);
    Kernel k_new = kernel_step_l1(u_new, f, k, threads);
    double e_new = tv_objective(u_new, k_new, f, lam);
    if (!(e_new <= energy)) {
      ++res.rejected;
      k_new = k;
      e_new = tv_objective(u_new, k, f, lam);
      if (!(e_new <= energy)) {
        res.warning = true;
        break;
      }
    }
    u = std::move(u_new);
    k = std::move(k_new);
    energy = e_new;
    res.objective.push_back(energy);
  }
  if (opts.final_iters > 0) {
    Image u_final = tv_l1_deconvolve(f, k, lam, opts.final_iters, &u, threads);
    const double e_final = tv_objective(u_final, k, f, lam);
    if (e_final <= energy) {
      u = std::move(u_final);
      res.objective.push_back(e_final);
    } else {
      ++res.rejected;
    }
  }
  for (double& v : u.values()) v = std::max(0.0, v) * peak;
  for (double& e : res.objective) e *= peak;
  res.image = IntensityImage(std::move(u));
  res.kernel = std::move(k);
  return res;
}

Kernel extract_kernel(const BlindTvResult& result) {
  const auto v = result.kernel.values();
  return Kernel(result.kernel.size(), std::vector<double>(v.begin(), v.end()));
}

Kernel center_kernel(const Kernel& h) {
  const std::size_t n = h.size();
  const auto r = static_cast<std::ptrdiff_t>(h.radius());
  double cx = 0.0, cy = 0.0;
  for (std::ptrdiff_t y = -r; y <= r; ++y)
    for (std::ptrdiff_t x = -r; x <= r; ++x) {
      cx += h.at(x, y) * static_cast<double>(x);
      cy += h.at(x, y) * static_cast<double>(y);
    }
  const auto sx = static_cast<std::ptrdiff_t>(std::llround(cx));
  const auto sy = static_cast<std::ptrdiff_t>(std::llround(cy));
  std::vector<double> v(n * n, 0.0);
  for (std::ptrdiff_t y = -r; y <= r; ++y)
    for (std::ptrdiff_t x = -r; x <= r; ++x) {
      const std::ptrdiff_t nx = x - sx, ny = y - sy;
      if (std::abs(nx) > r || std::abs(ny) > r) continue;
      v[static_cast<std::size_t>((ny + r) * static_cast<std::ptrdiff_t>(n) + nx + r)] = h.at(x, y);
    }
  return Kernel(n, std::move(v));
}

double kernel_rms_error(const Kernel& estimate, const Kernel& truth) {
  const Kernel a = center_kernel(estimate), b = center_kernel(truth);
  const std::size_t n = std::max(a.size(), b.size());
  const auto R = static_cast<std::ptrdiff_t>(n / 2);
  auto value = [](const Kernel& k, std::ptrdiff_t x, std::ptrdiff_t y) {
    const auto r = static_cast<std::ptrdiff_t>(k.radius());
    return (std::abs(x) > r || std::abs(y) > r) ? 0.0 : k.at(x, y);
  };
  double ss = 0.0;
  for (std::ptrdiff_t y = -R; y <= R; ++y)
    for (std::ptrdiff_t x = -R; x <= R; ++x) {
      const double d = value(a, x, y) - value(b, x, y);
      ss += d * d;
    }
  return std::sqrt(ss / static_cast<double>(n * n));
}

}  // namespace thz
