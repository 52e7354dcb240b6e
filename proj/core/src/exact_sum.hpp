#pragma once

#include <cmath>
#include <vector>

namespace decenergy::detail {

// Error-free accumulator after Shewchuk: the running sum is kept as a list of
// nonoverlapping doubles, so the final rounded value is independent of the
// order in which addends arrive. The component list stays short for inputs of
// similar magnitude, which is the case for per-coefficient log terms.
class ExactSum {
public:
    void add(double x) {
        std::size_t out = 0;
        for (double component : parts_) {
            double hi = x + component;
            double virt = hi - x;
            double lo = (x - (hi - virt)) + (component - virt);
            if (lo != 0.0) parts_[out++] = lo;
            x = hi;
        }
        parts_.resize(out);
        parts_.push_back(x);
    }

    double value() const {
        double total = 0.0;
        for (double component : parts_) total += component;
        return total;
    }

private:
    std::vector<double> parts_;
};

// Neumaier-compensated running sum; cheap and nearly exact, used where
// bit-for-bit order independence is not required.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace decenergy::detail
