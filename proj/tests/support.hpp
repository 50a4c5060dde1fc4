#pragma once

#include "afrda/autodiff.hpp"
#include "afrda/random.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

namespace afrda::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Tensor t(std::move(shape));
    for (double& v : t.data())
        v = uniform(rng, lo, hi);
    return t;
}

inline LabelMap random_labels(std::size_t b, std::size_t h, std::size_t w, int classes, Rng& rng)
{
    LabelMap m(b, h, w);
    for (int& v : m.data)
        v = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes)));
    return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(std::filesystem::temp_directory_path() / ("afrda_test_" + tag))
    {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace afrda::test
