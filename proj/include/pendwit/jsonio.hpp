#pragma once

// Artifact serialization. Result documents are written through a small
// ordered JSON emitter so every floating-point value is rendered with 17
// significant digits (lossless double round-trip) and key order is fixed,
// which makes artifacts byte-comparable across runs and thread counts.

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "pendwit/finders.hpp"

namespace pendwit {

std::string format_double(double v);  // %.17g

class Json {
 public:
  enum class Type { Null, Bool, Int, Double, String, Array, Object };

  Json() : type_(Type::Null) {}
  Json(bool b) : type_(Type::Bool), bool_(b) {}
  Json(int i) : type_(Type::Int), int_(i) {}
  Json(std::int64_t i) : type_(Type::Int), int_(i) {}
  Json(std::uint64_t i) : type_(Type::Int), int_(static_cast<std::int64_t>(i)) {}
  Json(double d) : type_(Type::Double), double_(d) {}
  Json(std::string s) : type_(Type::String), str_(std::move(s)) {}
  Json(std::string_view s) : type_(Type::String), str_(s) {}
  Json(const char* s) : type_(Type::String), str_(s) {}

  static Json object() {
    Json j;
    j.type_ = Type::Object;
    return j;
  }
  static Json array() {
    Json j;
    j.type_ = Type::Array;
    return j;
  }
  static Json vector(const Eigen::VectorXd& v);
  static Json matrix(const Eigen::MatrixXd& m);

  Json& set(std::string key, Json value);
  Json& push(Json value);

  Type type() const { return type_; }
  std::string dump(int indent = 2) const;

 private:
  void write(std::ostream& os, int indent, int depth) const;

  Type type_;
  bool bool_ = false;
  std::int64_t int_ = 0;
  double double_ = 0;
  std::string str_;
  std::vector<Json> array_;
  std::vector<std::pair<std::string, Json>> object_;
};

Json to_json(const Fate& fate);
Json to_json(const SurvivorResult& result);
Json to_json(const PeriodicOrbit& orbit);
Json to_json(const LyapunovRegion& region);
Json to_json(const VerificationReport& report);
Json to_json(const BasinGrid& grid);

// Declarative plot documents (Figs-style analogues): series of labeled
// (x, y) arrays plus axis names under a kind tag.
Json plot_trajectory(const DenseTrajectory& trajectory, SystemKind kind, double sample_step);
Json plot_bracket_history(const SurvivorResult& result);
Json plot_basin(const BasinGrid& grid);

// Sample times t0, t0+step, ..., t_end with t_end always included.
std::vector<double> csv_sample_times(double t0, double t_end, double step);

// header `t,q,p` / `t,q,p,x,y` / `t,phi,dphi,theta,dtheta`, 17-digit decimals
void write_trajectory_csv(std::ostream& os, const DenseTrajectory& trajectory, SystemKind kind,
                          double sample_step);
// row-major cell listing with the axis labels in the header
void write_basin_csv(std::ostream& os, const BasinGrid& grid);

}  // namespace pendwit
