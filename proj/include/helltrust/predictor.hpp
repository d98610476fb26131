#pragma once

#include <string>

#include "helltrust/dataset.hpp"

namespace helltrust {

/// A trained rating predictor. Scores are clamped to the training scale;
/// indices outside the training id space are treated as unseen.
class Predictor {
 public:
  virtual ~Predictor() = default;

  double predict(UserIndex u, ItemIndex j) const { return scale_.clamp(score(u, j)); }

  const RatingScale& scale() const noexcept { return scale_; }
  virtual std::string name() const = 0;

 protected:
  explicit Predictor(RatingScale scale) : scale_(scale) {}
  Predictor(const Predictor&) = default;
  Predictor& operator=(const Predictor&) = default;

  virtual double score(UserIndex u, ItemIndex j) const = 0;

 private:
  RatingScale scale_;
};

}  // namespace helltrust
