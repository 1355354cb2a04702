#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace reskit {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// d-dimensional sequence with a uniform time step; one row per frame.
struct TimeSeries {
    RowMatrix values;
    double dt = 1.0;

    TimeSeries() = default;
    explicit TimeSeries(RowMatrix v, double step = 1.0) : values(std::move(v)), dt(step) {}

    std::size_t length() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
    bool empty() const noexcept { return values.rows() == 0; }

    Eigen::VectorXd frame(std::size_t t) const {
        return values.row(static_cast<Eigen::Index>(t)).transpose();
    }
};

}  // namespace reskit
