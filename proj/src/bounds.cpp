#include "diffrl/bounds.hpp"

#include <algorithm>
#include <cmath>

namespace diffrl {

BoundsContext::BoundsContext(const Network &net) : net_(&net) {
    std::size_t width = net.input_width;
    for (const auto &l : net.layers) {
        Stage st;
        if (const auto *a = std::get_if<AffineLayer>(&l)) {
            st.w = a->weights;
            st.b = a->bias;
            st.width = a->out_width();
        } else if (const auto *s = std::get_if<SplitEmbedConcat>(&l)) {
            // Materialize as a block-sparse affine map over the full width.
            const std::size_t out = s->out_width();
            st.w = Matrix(out, width);
            st.b.resize(out);
            std::size_t row = 0;
            for (const auto &seg : s->segments) {
                for (std::size_t r = 0; r < seg.map.out_width(); ++r, ++row) {
                    for (std::size_t c = 0; c < seg.length; ++c)
                        st.w.at(row, seg.offset + c) = seg.map.weights.at(r, c);
                    st.b[row] = seg.map.bias[r];
                }
            }
            st.width = out;
        } else {
            st.relu = true;
            st.width = width;
        }
        width = st.width;
        stages_.push_back(std::move(st));
    }
    out_width_ = width;
}

std::vector<BoxBounds> BoundsContext::interval_bounds(const std::vector<Interval> &box) const {
    if (box.size() != input_width())
        throw ValidationError("interval_bounds: box width " + std::to_string(box.size()) +
                              " != input width " + std::to_string(input_width()));

    bool degenerate = true;
    for (const auto &iv : box)
        if (iv.lo != iv.hi) {
            degenerate = false;
            break;
        }
    if (degenerate) {
        // Exact forward evaluation, one point per stage.
        Vec cur(box.size());
        for (std::size_t i = 0; i < box.size(); ++i)
            cur[i] = box[i].lo;
        std::vector<BoxBounds> out;
        BoxBounds in;
        in.layer_index = 0;
        for (double v : cur)
            in.per_neuron.push_back({v, v});
        out.push_back(std::move(in));
        for (std::size_t li = 0; li < stages_.size(); ++li) {
            const Stage &st = stages_[li];
            Vec next;
            if (st.relu) {
                next = cur;
                for (double &v : next)
                    v = v > 0.0 ? v : 0.0;
            } else {
                next.resize(st.width);
                for (std::size_t r = 0; r < st.width; ++r) {
                    double acc = 0.0;
                    const double *w = st.w.data.data() + r * st.w.cols;
                    for (std::size_t c = 0; c < st.w.cols; ++c)
                        acc += w[c] * cur[c];
                    next[r] = acc + st.b[r];
                }
            }
            BoxBounds bb;
            bb.layer_index = li + 1;
            for (double v : next)
                bb.per_neuron.push_back({v, v});
            out.push_back(std::move(bb));
            cur.swap(next);
        }
        return out;
    }

    std::vector<BoxBounds> out;
    BoxBounds in;
    in.layer_index = 0;
    in.per_neuron = box;
    out.push_back(std::move(in));

    std::vector<Interval> cur = box;
    for (std::size_t li = 0; li < stages_.size(); ++li) {
        const Stage &st = stages_[li];
        std::vector<Interval> next;
        if (st.relu) {
            next = cur;
            for (auto &iv : next) {
                iv.lo = std::max(iv.lo, 0.0);
                iv.hi = std::max(iv.hi, 0.0);
            }
        } else {
            next.resize(st.width);
            for (std::size_t r = 0; r < st.width; ++r) {
                double lo = st.b[r], hi = st.b[r];
                const double *w = st.w.data.data() + r * st.w.cols;
                for (std::size_t c = 0; c < st.w.cols; ++c) {
                    const double a = w[c] * cur[c].lo;
                    const double b = w[c] * cur[c].hi;
                    lo += std::min(a, b);
                    hi += std::max(a, b);
                }
                next[r] = {lo, hi};
            }
        }
        BoxBounds bb;
        bb.layer_index = li + 1;
        bb.per_neuron = next;
        out.push_back(std::move(bb));
        cur.swap(next);
    }
    return out;
}

AffineForm BoundsContext::lower_form(const std::vector<BoxBounds> &stages,
                                     std::span<const double> c, double c0) const {
    // Backward pass: maintain an affine form A . z + a over the current
    // stage's neurons that lower-bounds the objective.
    Vec A(c.begin(), c.end());
    double a = c0;

    for (std::size_t li = stages_.size(); li-- > 0;) {
        const Stage &st = stages_[li];
        if (st.relu) {
            const auto &pre = stages[li].per_neuron; // pre-activation bounds
            for (std::size_t j = 0; j < A.size(); ++j) {
                const double l = pre[j].lo, u = pre[j].hi;
                if (l >= 0.0)
                    continue; // stable active: identity
                if (u <= 0.0) {
                    A[j] = 0.0; // stable inactive
                    continue;
                }
                if (A[j] >= 0.0) {
                    // Lower envelope from {0, identity}, smaller-area rule;
                    // ties pick identity.
                    if (u >= -l) {
                        // keep identity
                    } else {
                        A[j] = 0.0;
                    }
                } else {
                    // Upper chord: slope u/(u-l), value 0 at l.
                    const double slope = u / (u - l);
                    a += A[j] * (-slope * l);
                    A[j] *= slope;
                }
            }
        } else {
            // Objective A.(Wz + b) + a  =  (A.W).z + (A.b + a)
            Vec nA(st.w.cols, 0.0);
            for (std::size_t r = 0; r < st.w.rows; ++r) {
                const double ar = A[r];
                if (ar == 0.0)
                    continue;
                a += ar * st.b[r];
                const double *w = st.w.data.data() + r * st.w.cols;
                for (std::size_t col = 0; col < st.w.cols; ++col)
                    nA[col] += ar * w[col];
            }
            A.swap(nA);
        }
    }
    return AffineForm{std::move(A), a};
}

double BoundsContext::lower_bound(const std::vector<Interval> &box,
                                  const std::vector<BoxBounds> &stages, std::span<const double> c,
                                  double c0) const {
    const AffineForm form = lower_form(stages, c, c0);
    double lb = form.offset;
    for (std::size_t i = 0; i < box.size(); ++i) {
        const double a = form.coeffs[i] * box[i].lo;
        const double b = form.coeffs[i] * box[i].hi;
        lb += std::min(a, b);
    }
    // Plain interval bound of the objective over the output intervals;
    // take whichever is tighter.
    double ilb = c0;
    const auto &out = stages.back().per_neuron;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const double a = c[j] * out[j].lo;
        const double b = c[j] * out[j].hi;
        ilb += std::min(a, b);
    }
    return std::max(lb, ilb);
}

std::vector<BoxBounds> interval_bounds(const Network &net, const InputDomain &box) {
    BoundsContext ctx(net);
    return ctx.interval_bounds(box.per_feature);
}

std::vector<LinearBound> backward_linear_bounds(const Network &net, const InputDomain &box) {
    BoundsContext ctx(net);
    const auto stages = ctx.interval_bounds(box.per_feature);
    const std::size_t m = ctx.output_width();
    std::vector<LinearBound> out(m);
    Vec c(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        c[j] = 1.0;
        out[j].lower = ctx.lower_form(stages, c, 0.0);
        c[j] = -1.0;
        AffineForm neg = ctx.lower_form(stages, c, 0.0);
        for (double &v : neg.coeffs)
            v = -v;
        neg.offset = -neg.offset;
        out[j].upper = std::move(neg);
        c[j] = 0.0;
    }
    return out;
}

std::vector<Interval> concrete_output_bounds(const Network &net, const InputDomain &box) {
    BoundsContext ctx(net);
    const auto stages = ctx.interval_bounds(box.per_feature);
    const std::size_t m = ctx.output_width();
    std::vector<Interval> out(m);
    Vec c(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        c[j] = 1.0;
        out[j].lo = ctx.lower_bound(box.per_feature, stages, c, 0.0);
        c[j] = -1.0;
        out[j].hi = -ctx.lower_bound(box.per_feature, stages, c, 0.0);
        c[j] = 0.0;
    }
    return out;
}

std::vector<std::vector<ReluStatus>> stable_relu_mask(const Network &net, const InputDomain &box) {
    const auto stages = interval_bounds(net, box);
    std::vector<std::vector<ReluStatus>> mask(net.layers.size());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (!std::holds_alternative<ReluLayer>(net.layers[li]))
            continue;
        const auto &pre = stages[li].per_neuron;
        mask[li].reserve(pre.size());
        for (const auto &iv : pre) {
            if (iv.lo >= 0.0)
                mask[li].push_back(ReluStatus::AlwaysActive);
            else if (iv.hi <= 0.0)
                mask[li].push_back(ReluStatus::AlwaysInactive);
            else
                mask[li].push_back(ReluStatus::Unstable);
        }
    }
    return mask;
}

TightenResult tighten_with_output_constraints(const std::vector<Interval> &output_bounds,
                                              std::span<const LinearOutputConstraint> constraints) {
    TightenResult res;
    res.outputs = output_bounds;
    const std::size_t m = output_bounds.size();

    for (int round = 0; round < 16; ++round) {
        bool changed = false;
        for (const auto &cst : constraints) {
            // min over the current box of the terms other than k
            for (std::size_t k = 0; k < m; ++k) {
                const double ck = cst.coeffs[k];
                if (ck == 0.0)
                    continue;
                double rest_min = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == k)
                        continue;
                    const double cj = cst.coeffs[j];
                    if (cj == 0.0)
                        continue;
                    rest_min += std::min(cj * res.outputs[j].lo, cj * res.outputs[j].hi);
                }
                const double budget = cst.rhs - rest_min; // ck * y_k <= budget
                if (ck > 0.0) {
                    const double new_hi = budget / ck;
                    if (new_hi < res.outputs[k].hi - 1e-15) {
                        res.outputs[k].hi = new_hi;
                        changed = true;
                    }
                } else {
                    const double new_lo = budget / ck;
                    if (new_lo > res.outputs[k].lo + 1e-15) {
                        res.outputs[k].lo = new_lo;
                        changed = true;
                    }
                }
                if (res.outputs[k].lo > res.outputs[k].hi + 1e-12) {
                    res.infeasible = true;
                    return res;
                }
            }
        }
        if (!changed)
            break;
    }
    return res;
}

TightenResult tighten_with_output_constraints(const std::vector<LinearBound> &bounds,
                                              const InputDomain &box, const Query &query) {
    std::vector<Interval> concrete(bounds.size());
    for (std::size_t j = 0; j < bounds.size(); ++j) {
        double lo = bounds[j].lower.offset, hi = bounds[j].upper.offset;
        for (std::size_t i = 0; i < box.width(); ++i) {
            lo += std::min(bounds[j].lower.coeffs[i] * box.per_feature[i].lo,
                           bounds[j].lower.coeffs[i] * box.per_feature[i].hi);
            hi += std::max(bounds[j].upper.coeffs[i] * box.per_feature[i].lo,
                           bounds[j].upper.coeffs[i] * box.per_feature[i].hi);
        }
        concrete[j] = {lo, hi};
    }
    return tighten_with_output_constraints(concrete, query.output_constraints);
}

} // namespace diffrl
