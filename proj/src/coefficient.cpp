#include "slt/coefficient.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

namespace slt {

namespace {

// Locates x in sorted coords: returns the left cell index and the fraction, clamped to the table.
std::pair<int, double> locate(const std::vector<double>& c, double x) {
  const int m = static_cast<int>(c.size());
  if (m == 1) return {0, 0.0};
  if (x <= c.front()) return {0, 0.0};
  if (x >= c.back()) return {m - 2, 1.0};
  const int i = static_cast<int>(std::upper_bound(c.begin(), c.end(), x) - c.begin()) - 1;
  return {i, (x - c[i]) / (c[i + 1] - c[i])};
}

double table_at(const SampleTable& t, const std::array<int, kMaxDim>& k) {
  std::size_t idx = 0;
  for (int a = 0; a < t.dim; ++a) idx = idx * t.coords[a].size() + k[a];
  return t.values[idx];
}

// Multilinear value and gradient.
double table_eval(const SampleTable& t, const Vec& x, Vec* grad) {
  std::array<int, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  std::array<double, kMaxDim> width{};
  std::array<bool, kMaxDim> inside{};
  for (int a = 0; a < t.dim; ++a) {
    const auto [i, f] = locate(t.coords[a], x(a));
    base[a] = i;
    frac[a] = f;
    const auto& c = t.coords[a];
    width[a] = c.size() > 1 ? c[i + 1] - c[i] : 1.0;
    inside[a] = c.size() > 1 && x(a) > c.front() && x(a) < c.back();
  }
  double value = 0.0;
  if (grad) *grad = Vec::Zero(t.dim);
  const int corners = 1 << t.dim;
  for (int corner = 0; corner < corners; ++corner) {
    std::array<int, kMaxDim> k = base;
    double w = 1.0;
    for (int a = 0; a < t.dim; ++a) {
      const int bit = (corner >> a) & 1;
      if (t.coords[a].size() > 1) k[a] += bit;
      const double wa = bit ? frac[a] : 1.0 - frac[a];
      w *= wa;
    }
    const double v = table_at(t, k);
    value += w * v;
    if (!grad) continue;
    for (int a = 0; a < t.dim; ++a) {
      if (!inside[a]) continue;
      double p = ((corner >> a) & 1) ? 1.0 / width[a] : -1.0 / width[a];
      for (int b = 0; b < t.dim; ++b) {
        if (b == a) continue;
        p *= ((corner >> b) & 1) ? frac[b] : 1.0 - frac[b];
      }
      (*grad)(a) += p * v;
    }
  }
  return value;
}

}  // namespace

Coefficient Coefficient::constant(double c) {
  Coefficient k;
  k.kind_ = Kind::Constant;
  k.a_ = c;
  return k;
}

Coefficient Coefficient::quadratic(double a, double b) {
  Coefficient k;
  k.kind_ = b == 0.0 ? Kind::Constant : Kind::Quadratic;
  k.a_ = a;
  k.b_ = b;
  return k;
}

Coefficient Coefficient::samples(SampleTable table) {
  if (table.dim < 2 || table.dim > kMaxDim || static_cast<int>(table.coords.size()) != table.dim) {
    fail(ErrorCode::BadDimension, "sample table dimension must be 2 or 3");
  }
  std::size_t expected = 1;
  for (const auto& c : table.coords) {
    if (c.empty() || !std::is_sorted(c.begin(), c.end())) fail(ErrorCode::ConfigError, "sample coordinates must be sorted");
    expected *= c.size();
  }
  if (table.values.size() != expected) fail(ErrorCode::ConfigError, "sample table is not a full tensor lattice");
  Coefficient k;
  k.kind_ = Kind::Samples;
  k.table_ = std::make_shared<const SampleTable>(std::move(table));
  return k;
}

Coefficient Coefficient::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ConfigError, "empty sample file");
  const int columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  const int dim = columns - 1;
  if (dim < 2 || dim > kMaxDim) fail(ErrorCode::ConfigError, "sample file needs columns x,y[,z],value");
  std::vector<std::array<double, kMaxDim + 1>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::array<double, kMaxDim + 1> row{};
    for (int c = 0; c < columns; ++c) {
      if (!(ss >> row[c])) fail(ErrorCode::ConfigError, "bad number in sample file at line " + std::to_string(line_no));
    }
    rows.push_back(row);
  }
  SampleTable t;
  t.dim = dim;
  t.coords.resize(dim);
  for (int a = 0; a < dim; ++a) {
    for (const auto& r : rows) t.coords[a].push_back(r[a]);
    std::sort(t.coords[a].begin(), t.coords[a].end());
    t.coords[a].erase(std::unique(t.coords[a].begin(), t.coords[a].end()), t.coords[a].end());
  }
  std::size_t total = 1;
  for (const auto& c : t.coords) total *= c.size();
  if (total != rows.size()) fail(ErrorCode::ConfigError, "sample file is not a full tensor lattice");
  t.values.assign(total, 0.0);
  for (const auto& r : rows) {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) {
      const auto& c = t.coords[a];
      idx = idx * c.size() + (std::lower_bound(c.begin(), c.end(), r[a]) - c.begin());
    }
    t.values[idx] = r[dim];
  }
  return samples(std::move(t));
}

double Coefficient::value(const Vec& x) const {
  switch (kind_) {
    case Kind::Constant: return scale_ * a_ + shift_;
    case Kind::Quadratic: return scale_ * (a_ + b_ * x.squaredNorm()) + shift_;
    case Kind::Samples: return scale_ * table_eval(*table_, x, nullptr) + shift_;
  }
  return 0.0;
}

Vec Coefficient::gradient(const Vec& x) const {
  switch (kind_) {
    case Kind::Constant: return Vec::Zero(x.size());
    case Kind::Quadratic: return scale_ * 2.0 * b_ * x;
    case Kind::Samples: {
      Vec g;
      table_eval(*table_, x, &g);
      return scale_ * g;
    }
  }
  return Vec::Zero(x.size());
}

Coefficient Coefficient::affine(double scale, double shift) const {
  Coefficient k = *this;
  k.scale_ = scale * scale_;
  k.shift_ = scale * shift_ + shift;
  return k;
}

std::string Coefficient::describe() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind_) {
    case Kind::Constant: out << "const " << c0(); break;
    case Kind::Quadratic: out << "quadratic " << c0() << " + " << c2() << "*r2"; break;
    case Kind::Samples: out << "samples scale " << scale_ << " shift " << shift_; break;
  }
  return out.str();
}

}  // namespace slt
