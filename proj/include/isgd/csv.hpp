#pragma once

#include <string>
#include <vector>

#include "isgd/cox_model.hpp"
#include "isgd/model_family.hpp"

namespace isgd {

/// All floating-point output uses 17 significant digits so identical
/// runs produce byte-identical files.
std::string format_double(double value);

/// Dataset CSV with header "y,x1,...,xp".
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

/// Survival CSV with header "time,status,x1,...,xp"; rows are sorted by
/// time on read.
void write_survival_csv(const std::string& path, const SurvivalDataset& data);
SurvivalDataset read_survival_csv(const std::string& path);

/// Trajectory CSV with header "iter,theta_1,...,theta_p".
void write_trajectory_csv(const std::string& path, const std::vector<long>& iters,
                          const std::vector<Vector>& thetas);

/// Headerless rectangular numeric CSV (e.g. a condition matrix).
Matrix read_matrix_csv(const std::string& path);

/// Comma-separated values on one line (no header).
std::string join_csv(const Vector& v);

} // namespace isgd
