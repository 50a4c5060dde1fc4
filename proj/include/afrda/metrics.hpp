#pragma once

#include "afrda/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace afrda {

/// C x C pixel counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);

    /// Counts every pixel whose truth is not `ignore_id`. Throws DomainError on
    /// class ids outside [0, C) and leaves the matrix untouched in that case.
    void accumulate(const LabelMap& pred, const LabelMap& truth, int ignore_id = kIgnoreLabel);

    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
    std::size_t num_classes() const noexcept { return classes_; }
    std::uint64_t total() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t classes_;
    std::vector<std::uint64_t> counts_;
};

struct IouReport {
    std::vector<std::optional<double>> per_class;  // nullopt: class absent from truth and prediction
    double miou = 0.0;                              // mean over present classes
};

/// IoU_c = tp / (row_c + col_c - tp). Throws DomainError when every class is absent.
IouReport iou(const ConfusionMatrix& cm);

std::vector<std::string> class_names(std::size_t num_classes);

/// One header row of class names plus mIoU, one row of values.
std::string format_iou_table(const IouReport& report, const std::vector<std::string>& names);

}  // namespace afrda
