#pragma once

#include <stdexcept>
#include <string>

namespace citune {

/// Failure of a numerical or modelling condition (lost excitation, graph not
/// connected on average, infeasible LMI, diverging integration). The `kind`
/// is a stable machine-readable tag; `what()` carries the human diagnostic.
class DomainError : public std::runtime_error {
public:
    DomainError(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

namespace error_kind {
inline constexpr const char* not_connected = "not_connected";
inline constexpr const char* cpe_violated = "cpe_violated";
inline constexpr const char* non_finite = "non_finite";
inline constexpr const char* lemma1_nonpositive = "lemma1_nonpositive";
inline constexpr const char* infeasible = "infeasible";
inline constexpr const char* excitation_failure = "excitation_failure";
inline constexpr const char* non_psd = "non_psd";
inline constexpr const char* data_inconsistency = "data_inconsistency";
inline constexpr const char* metric_undefined = "metric_undefined";
}  // namespace error_kind

}  // namespace citune
