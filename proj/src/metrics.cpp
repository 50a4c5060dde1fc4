#include "afrda/metrics.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

namespace afrda {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : classes_(num_classes), counts_(num_classes * num_classes, 0)
{
    if (num_classes == 0)
        throw DomainError("confusion matrix needs at least one class");
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& truth, int ignore_id)
{
    if (pred.batch != truth.batch || pred.height != truth.height || pred.width != truth.width)
        throw ShapeError("prediction and ground truth maps differ in shape");
    const auto in_range = [this](int v) { return v >= 0 && static_cast<std::size_t>(v) < classes_; };
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
        if (truth.data[i] == ignore_id)
            continue;
        if (!in_range(truth.data[i]) || !in_range(pred.data[i]))
            throw DomainError("class id out of range at pixel " + std::to_string(i));
    }
    for (std::size_t i = 0; i < truth.data.size(); ++i)
        if (truth.data[i] != ignore_id)
            ++counts_[static_cast<std::size_t>(truth.data[i]) * classes_ + static_cast<std::size_t>(pred.data[i])];
}

std::uint64_t ConfusionMatrix::total() const
{
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

IouReport iou(const ConfusionMatrix& cm)
{
    const std::size_t n = cm.num_classes();
    IouReport report;
    report.per_class.resize(n);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < n; ++c) {
        std::uint64_t row = 0;
        std::uint64_t col = 0;
        for (std::size_t k = 0; k < n; ++k) {
            row += cm.at(c, k);
            col += cm.at(k, c);
        }
        const std::uint64_t tp = cm.at(c, c);
        const std::uint64_t denom = row + col - tp;
        if (denom == 0)
            continue;
        const double v = static_cast<double>(tp) / static_cast<double>(denom);
        report.per_class[c] = v;
        sum += v;
        ++present;
    }
    if (present == 0)
        throw DomainError("mIoU undefined: every class is absent");
    report.miou = sum / static_cast<double>(present);
    return report;
}

std::vector<std::string> class_names(std::size_t num_classes)
{
    static const char* const names[] = {"background", "disk", "rectangle", "thin-bar"};
    std::vector<std::string> out;
    for (std::size_t c = 0; c < num_classes; ++c)
        out.emplace_back(c < 4 ? names[c] : "class" + std::to_string(c));
    return out;
}

std::string format_iou_table(const IouReport& report, const std::vector<std::string>& names)
{
    std::ostringstream os;
    os << std::left;
    for (std::size_t c = 0; c < report.per_class.size(); ++c)
        os << std::setw(12) << (c < names.size() ? names[c] : "class" + std::to_string(c));
    os << "mIoU\n" << std::fixed << std::setprecision(4);
    for (const auto& v : report.per_class) {
        if (v)
            os << std::setw(12) << *v;
        else
            os << std::setw(12) << "-";
    }
    os << report.miou << '\n';
    return os.str();
}

}  // namespace afrda
