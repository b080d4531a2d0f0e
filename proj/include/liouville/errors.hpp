#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace liouville {

/// Base class for every error thrown by the toolkit.
struct toolkit_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Coefficient matrix of the 2-form is (numerically) degenerate at a point.
struct singular_form_error : toolkit_error {
    singular_form_error(std::string msg, Eigen::VectorXd where, double det)
        : toolkit_error(std::move(msg)), point(std::move(where)), det_value(det) {}
    Eigen::VectorXd point;
    double det_value;
};

/// A point (or a map image) fell outside the chart box.
struct out_of_domain_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// A trajectory crossed the chart boundary; carries the estimated exit time.
struct left_domain_error : toolkit_error {
    left_domain_error(std::string msg, double t, Eigen::VectorXd state)
        : toolkit_error(std::move(msg)), t_exit(t), exit_state(std::move(state)) {}
    double t_exit;
    Eigen::VectorXd exit_state;
};

/// The adaptive step controller stalled (step size underflow or step budget).
struct step_failure_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// A Newton iteration failed to converge.
struct newton_divergence_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// dF (or a vector-field frame) is rank deficient at the requested point.
struct not_regular_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

struct rank_deficient_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// A form fed to the homotopy operator is not closed; echoes the residual.
struct not_closed_error : toolkit_error {
    not_closed_error(std::string msg, double res)
        : toolkit_error(std::move(msg)), residual(res) {}
    double residual;
};

/// Numerical inversion of a chart map failed.
struct inversion_failure_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// Every transversal candidate lost independence during family extension.
struct no_independent_candidate_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// Expression evaluation hit a pole (division by zero, sqrt of a negative).
struct eval_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// Text could not be parsed; position is 1-based.
struct parse_error : toolkit_error {
    parse_error(std::string msg, int line_, int column_)
        : toolkit_error(std::move(msg)), line(line_), column(column_) {}
    int line;
    int column;
};

/// A parsed document is structurally inconsistent.
struct validation_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

struct unknown_system_error : toolkit_error {
    using toolkit_error::toolkit_error;
};

/// Wraps a failure from one stage of the Darboux pipeline with provenance.
struct pipeline_stage_error : toolkit_error {
    pipeline_stage_error(const std::string& stage_, const std::string& what_)
        : toolkit_error("[stage " + stage_ + "] " + what_), stage(stage_) {}
    std::string stage;
};

}  // namespace liouville
