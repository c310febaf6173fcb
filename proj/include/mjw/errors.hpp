#pragma once

#include <stdexcept>
#include <string>

namespace mjw {

enum class errc {
  // densities
  empty_support,
  non_increasing_grid,
  negative_mass,
  zero_total_mass,
  quantile_out_of_range,
  invalid_order,
  // point sets and sets with uncertainty
  duplicate_point,
  overlapping_supports,
  empty_set,
  // change point sampler
  segment_too_short,
  no_splittable_segment,
  no_removable_changepoint,
  series_too_short,
  non_finite_input,
  empty_posterior,
  // distance matrices
  empty_collection,
  empty_member_set,
  too_few_series,
  // price panels
  window_too_short,
  non_positive_price,
  parse_error,
  unsorted_dates,
  // driver
  config_error,
  numerical_failure,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::empty_support: return "EmptySupport";
    case errc::non_increasing_grid: return "NonIncreasingGrid";
    case errc::negative_mass: return "NegativeMass";
    case errc::zero_total_mass: return "ZeroTotalMass";
    case errc::quantile_out_of_range: return "QuantileOutOfRange";
    case errc::invalid_order: return "InvalidOrder";
    case errc::duplicate_point: return "DuplicatePoint";
    case errc::overlapping_supports: return "OverlappingSupports";
    case errc::empty_set: return "EmptySet";
    case errc::segment_too_short: return "SegmentTooShort";
    case errc::no_splittable_segment: return "NoSplittableSegment";
    case errc::no_removable_changepoint: return "NoRemovableChangePoint";
    case errc::series_too_short: return "SeriesTooShort";
    case errc::non_finite_input: return "NonFiniteInput";
    case errc::empty_posterior: return "EmptyPosterior";
    case errc::empty_collection: return "EmptyCollection";
    case errc::empty_member_set: return "EmptyMemberSet";
    case errc::too_few_series: return "TooFewSeries";
    case errc::window_too_short: return "WindowTooShort";
    case errc::non_positive_price: return "NonPositivePrice";
    case errc::parse_error: return "ParseError";
    case errc::unsorted_dates: return "UnsortedDates";
    case errc::config_error: return "ConfigError";
    case errc::numerical_failure: return "NumericalFailure";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, errc code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace mjw
