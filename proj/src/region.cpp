#include "selektor/region.hpp"

#include "selektor/errors.hpp"
#include "selektor/normal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace selektor {

IntervalUnion::IntervalUnion(std::initializer_list<Interval> pieces)
    : IntervalUnion(std::vector<Interval>(pieces)) {}

IntervalUnion::IntervalUnion(std::vector<Interval> pieces) {
    std::erase_if(pieces, [](const Interval& iv) { return !(iv.lo < iv.hi); });
    std::sort(pieces.begin(), pieces.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (const auto& iv : pieces) {
        if (!pieces_.empty() && iv.lo <= pieces_.back().hi) {
            pieces_.back().hi = std::max(pieces_.back().hi, iv.hi);
        } else {
            pieces_.push_back(iv);
        }
    }
}

IntervalUnion IntervalUnion::real_line() { return IntervalUnion{{-kInf, kInf}}; }

double IntervalUnion::lower() const {
    require(!empty(), "IntervalUnion::lower on empty set");
    return pieces_.front().lo;
}

double IntervalUnion::upper() const {
    require(!empty(), "IntervalUnion::upper on empty set");
    return pieces_.back().hi;
}

bool IntervalUnion::contains(double x) const {
    return std::any_of(pieces_.begin(), pieces_.end(),
                       [x](const Interval& iv) { return iv.lo <= x && x <= iv.hi; });
}

IntervalUnion IntervalUnion::intersect(const Interval& window) const {
    std::vector<Interval> out;
    for (const auto& iv : pieces_) {
        out.push_back({std::max(iv.lo, window.lo), std::min(iv.hi, window.hi)});
    }
    return IntervalUnion(std::move(out));
}

IntervalUnion IntervalUnion::intersect(const IntervalUnion& other) const {
    std::vector<Interval> out;
    for (const auto& a : pieces_) {
        for (const auto& b : other.pieces_) {
            out.push_back({std::max(a.lo, b.lo), std::min(a.hi, b.hi)});
        }
    }
    return IntervalUnion(std::move(out));
}

IntervalUnion IntervalUnion::unite(const IntervalUnion& other) const {
    std::vector<Interval> all = pieces_;
    all.insert(all.end(), other.pieces_.begin(), other.pieces_.end());
    return IntervalUnion(std::move(all));
}

IntervalUnion IntervalUnion::affine(double scale, double shift) const {
    require(scale > 0.0, "IntervalUnion::affine needs a positive scale");
    std::vector<Interval> out;
    for (const auto& iv : pieces_) out.push_back({scale * iv.lo + shift, scale * iv.hi + shift});
    return IntervalUnion(std::move(out));
}

std::string IntervalUnion::to_string() const {
    if (empty()) return "{}";
    std::ostringstream os;
    os.precision(10);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (i) os << " U ";
        os << '(' << pieces_[i].lo << ", " << pieces_[i].hi << ')';
    }
    return os.str();
}

Polytope::Polytope(Eigen::MatrixXd A_, Eigen::VectorXd b_) : A(std::move(A_)), b(std::move(b_)) {
    validate();
}

Polytope Polytope::whole_space(Eigen::Index dim) {
    return Polytope(Eigen::MatrixXd(0, dim), Eigen::VectorXd(0));
}

void Polytope::validate() const {
    require(A.rows() == b.size(), "Polytope: A and b have inconsistent row counts");
    require(A.allFinite(), "Polytope: A has non-finite entries");
    require(!b.hasNaN(), "Polytope: b has NaN entries");
}

bool Polytope::contains(const Eigen::VectorXd& y, double tol) const {
    require(y.size() == dim(), "Polytope::contains: dimension mismatch");
    if (rows() == 0) return true;
    return ((A * y - b).array() <= tol * (1.0 + b.array().abs())).all();
}

Interval chord_from_slack(const Eigen::Ref<const Eigen::VectorXd>& slack,
                          const Eigen::Ref<const Eigen::VectorXd>& direction_image, double tol) {
    double lo = -kInf;
    double hi = kInf;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
        const double a = direction_image[i];
        const double s = std::max(slack[i], 0.0);
        if (a > tol) {
            hi = std::min(hi, s / a);
        } else if (a < -tol) {
            lo = std::max(lo, s / a);
        } else if (slack[i] < -tol) {
            return {1.0, -1.0};
        }
    }
    return {lo, hi};
}

Interval Polytope::chord(const Eigen::VectorXd& y, const Eigen::VectorXd& d) const {
    require(y.size() == dim() && d.size() == dim(), "Polytope::chord: dimension mismatch");
    if (rows() == 0) return {-kInf, kInf};
    const Eigen::VectorXd slack = b - A * y;
    const Eigen::VectorXd image = A * d;
    if ((slack.array() < -1e-10 * (1.0 + b.array().abs())).any()) {
        // y outside: solve the full set { t : A d t <= slack } without clamping
        double lo = -kInf, hi = kInf;
        for (Eigen::Index i = 0; i < slack.size(); ++i) {
            if (image[i] > 0) hi = std::min(hi, slack[i] / image[i]);
            else if (image[i] < 0) lo = std::max(lo, slack[i] / image[i]);
            else if (slack[i] < 0) return {1.0, -1.0};
        }
        return {lo, hi};
    }
    return chord_from_slack(slack, image, 0.0);
}

SelectionRegion::SelectionRegion(Polytope single) : SelectionRegion(std::vector<Polytope>{std::move(single)}) {}

SelectionRegion::SelectionRegion(std::vector<Polytope> parts) : parts_(std::move(parts)) {
    require(!parts_.empty(), "SelectionRegion needs at least one polytope");
    dim_ = parts_.front().dim();
    for (const auto& p : parts_) {
        p.validate();
        require(p.dim() == dim_, "SelectionRegion: polytopes of different dimension");
    }
}

SelectionRegion SelectionRegion::whole_space(Eigen::Index dim) {
    return SelectionRegion(Polytope::whole_space(dim));
}

bool SelectionRegion::contains(const Eigen::VectorXd& y, double tol) const {
    return std::any_of(parts_.begin(), parts_.end(),
                       [&](const Polytope& p) { return p.contains(y, tol); });
}

IntervalUnion SelectionRegion::chord(const Eigen::VectorXd& y, const Eigen::VectorXd& d) const {
    std::vector<Interval> pieces;
    pieces.reserve(parts_.size());
    for (const auto& p : parts_) pieces.push_back(p.chord(y, d));
    return IntervalUnion(std::move(pieces));
}

SelectionRegion SelectionRegion::reparametrize(const Eigen::VectorXd& origin,
                                               const Eigen::MatrixXd& basis) const {
    require(origin.size() == dim_ && basis.rows() == dim_, "reparametrize: dimension mismatch");
    std::vector<Polytope> out;
    out.reserve(parts_.size());
    for (const auto& p : parts_) out.emplace_back(p.A * basis, p.b - p.A * origin);
    return SelectionRegion(std::move(out));
}

SelectionRegion SelectionRegion::shifted(const Eigen::VectorXd& offset) const {
    require(offset.size() == dim_, "shifted: dimension mismatch");
    std::vector<Polytope> out;
    out.reserve(parts_.size());
    for (const auto& p : parts_) out.emplace_back(p.A, p.b - p.A * offset);
    return SelectionRegion(std::move(out));
}

SelectionRegion SelectionRegion::lifted(Eigen::Index total_dim) const {
    require(total_dim >= dim_, "lifted: target dimension smaller than region dimension");
    std::vector<Polytope> out;
    out.reserve(parts_.size());
    for (const auto& p : parts_) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p.rows(), total_dim);
        A.leftCols(dim_) = p.A;
        out.emplace_back(std::move(A), p.b);
    }
    return SelectionRegion(std::move(out));
}

} // namespace selektor
