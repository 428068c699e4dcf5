#include "isgd/csv.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace isgd {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_field(const std::string& field, const std::string& path, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        const double value = std::stod(field, &pos);
        while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
        if (pos != field.size()) throw std::invalid_argument("trailing characters");
        return value;
    } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed value '" +
                                 field + "'");
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

} // namespace

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

std::string join_csv(const Vector& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v(i));
    }
    return out;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    auto out = open_out(path);
    const Eigen::Index p = dataset_dim(data);
    out << "y";
    for (Eigen::Index j = 1; j <= p; ++j) out << ",x" << j;
    out << "\n";
    for (const auto& obs : data)
        out << format_double(obs.y) << ',' << join_csv(obs.x) << "\n";
}

Dataset read_dataset_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    Dataset data;
    Eigen::Index p = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("y", 0) == 0) continue; // header
        const auto fields = split_line(line);
        if (fields.size() < 2)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": need y and covariates");
        if (p < 0)
            p = static_cast<Eigen::Index>(fields.size()) - 1;
        else if (static_cast<Eigen::Index>(fields.size()) - 1 != p)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": inconsistent columns");
        Observation obs;
        obs.y = parse_field(fields[0], path, line_no);
        obs.x.resize(p);
        for (Eigen::Index j = 0; j < p; ++j)
            obs.x(j) = parse_field(fields[static_cast<std::size_t>(j) + 1], path, line_no);
        data.push_back(std::move(obs));
    }
    if (data.empty()) throw std::runtime_error(path + ": no data rows");
    return data;
}

void write_survival_csv(const std::string& path, const SurvivalDataset& data) {
    auto out = open_out(path);
    const Eigen::Index p = data.dim();
    out << "time,status";
    for (Eigen::Index j = 1; j <= p; ++j) out << ",x" << j;
    out << "\n";
    for (const auto& row : data.obs)
        out << format_double(row.time) << ',' << row.status << ',' << join_csv(row.x) << "\n";
}

SurvivalDataset read_survival_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<SurvivalObservation> rows;
    Eigen::Index p = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("time", 0) == 0) continue;
        const auto fields = split_line(line);
        if (fields.size() < 3)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": need time, status and covariates");
        if (p < 0)
            p = static_cast<Eigen::Index>(fields.size()) - 2;
        else if (static_cast<Eigen::Index>(fields.size()) - 2 != p)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": inconsistent columns");
        SurvivalObservation row;
        row.time = parse_field(fields[0], path, line_no);
        const double status = parse_field(fields[1], path, line_no);
        if (status != 0.0 && status != 1.0)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": status must be 0 or 1");
        row.status = static_cast<int>(status);
        row.x.resize(p);
        for (Eigen::Index j = 0; j < p; ++j)
            row.x(j) = parse_field(fields[static_cast<std::size_t>(j) + 2], path, line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");
    return SurvivalDataset::from_unsorted(std::move(rows));
}

Matrix read_matrix_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_line(line);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& field : fields) row.push_back(parse_field(field, path, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": ragged matrix row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void write_trajectory_csv(const std::string& path, const std::vector<long>& iters,
                          const std::vector<Vector>& thetas) {
    if (iters.size() != thetas.size())
        throw std::invalid_argument("write_trajectory_csv: length mismatch");
    auto out = open_out(path);
    const Eigen::Index p = thetas.empty() ? 0 : thetas.front().size();
    out << "iter";
    for (Eigen::Index j = 1; j <= p; ++j) out << ",theta_" << j;
    out << "\n";
    for (std::size_t i = 0; i < iters.size(); ++i)
        out << iters[i] << ',' << join_csv(thetas[i]) << "\n";
}

} // namespace isgd
