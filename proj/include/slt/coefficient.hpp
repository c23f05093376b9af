#pragma once

// Scalar data on the domain (the right-hand side f and the boundary data phi).
// Three forms: a constant, a radial quadratic a + b|x|^2, or values sampled on
// a tensor lattice and interpolated multilinearly. Every form can be mapped
// through s*c + t, which is how the homotopy blends data towards 1 and 0.

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "slt/common.hpp"

namespace slt {

struct SampleTable {
  int dim = 2;
  std::vector<std::vector<double>> coords;  // sorted lattice coordinates per axis
  std::vector<double> values;               // last axis fastest
};

class Coefficient {
 public:
  enum class Kind { Constant, Quadratic, Samples };

  Coefficient() = default;
  static Coefficient constant(double c);
  /// a + b |x|^2
  static Coefficient quadratic(double a, double b);
  static Coefficient samples(SampleTable table);
  /// Reads "x,y[,z],value" rows (header line first) lying on a tensor lattice.
  static Coefficient read_csv(std::istream& in);

  Kind kind() const { return kind_; }
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;

  /// scale * this + shift
  Coefficient affine(double scale, double shift) const;

  bool is_constant() const { return kind_ == Kind::Constant; }
  bool is_radial() const { return kind_ != Kind::Samples; }
  // For radial forms: value = c0 + c2 r^2.
  double c0() const { return a_ * scale_ + shift_; }
  double c2() const { return b_ * scale_; }

  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double a_ = 0.0;
  double b_ = 0.0;
  double scale_ = 1.0;
  double shift_ = 0.0;
  std::shared_ptr<const SampleTable> table_;
};

}  // namespace slt
