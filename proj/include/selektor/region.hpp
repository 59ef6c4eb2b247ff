#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace selektor {

struct Interval {
    double lo;
    double hi;
};

// Finite union of disjoint intervals, kept sorted. Endpoints may be infinite;
// empty and zero-length pieces are dropped on construction.
class IntervalUnion {
public:
    IntervalUnion() = default;
    IntervalUnion(std::initializer_list<Interval> pieces);
    explicit IntervalUnion(std::vector<Interval> pieces);

    static IntervalUnion real_line();

    const std::vector<Interval>& intervals() const noexcept { return pieces_; }
    bool empty() const noexcept { return pieces_.empty(); }
    std::size_t size() const noexcept { return pieces_.size(); }

    double lower() const;
    double upper() const;
    bool contains(double x) const;

    IntervalUnion intersect(const Interval& window) const;
    IntervalUnion intersect(const IntervalUnion& other) const;
    IntervalUnion unite(const IntervalUnion& other) const;
    // x -> scale * x + shift, scale > 0
    IntervalUnion affine(double scale, double shift) const;

    std::string to_string() const;

private:
    std::vector<Interval> pieces_;
};

// { y : A y <= b }. A polytope with zero rows is the whole space.
struct Polytope {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    Polytope() = default;
    Polytope(Eigen::MatrixXd A_, Eigen::VectorXd b_);

    static Polytope whole_space(Eigen::Index dim);

    Eigen::Index dim() const noexcept { return A.cols(); }
    Eigen::Index rows() const noexcept { return A.rows(); }
    bool contains(const Eigen::VectorXd& y, double tol = 1e-10) const;

    // { t : y + t d in polytope }, a single (possibly empty) interval.
    Interval chord(const Eigen::VectorXd& y, const Eigen::VectorXd& d) const;

    void validate() const;
};

// Chord of a polytope along a line, given the slacks b - A y and the
// directional images A d. Returns lo > hi when empty.
Interval chord_from_slack(const Eigen::Ref<const Eigen::VectorXd>& slack,
                          const Eigen::Ref<const Eigen::VectorXd>& direction_image,
                          double tol = 1e-12);

// Union of polytopes; membership is the OR over parts.
class SelectionRegion {
public:
    SelectionRegion() = default;
    explicit SelectionRegion(Polytope single);
    explicit SelectionRegion(std::vector<Polytope> parts);

    static SelectionRegion whole_space(Eigen::Index dim);

    const std::vector<Polytope>& parts() const noexcept { return parts_; }
    Eigen::Index dim() const noexcept { return dim_; }

    bool contains(const Eigen::VectorXd& y, double tol = 1e-10) const;
    IntervalUnion chord(const Eigen::VectorXd& y, const Eigen::VectorXd& d) const;

    // Region in the coordinates of x = origin + basis * v.
    SelectionRegion reparametrize(const Eigen::VectorXd& origin, const Eigen::MatrixXd& basis) const;
    // Region for y' = y - offset.
    SelectionRegion shifted(const Eigen::VectorXd& offset) const;
    // Embed a region on the first dim() coordinates into R^total_dim, leaving the rest free.
    SelectionRegion lifted(Eigen::Index total_dim) const;

private:
    std::vector<Polytope> parts_;
    Eigen::Index dim_ = 0;
};

} // namespace selektor
