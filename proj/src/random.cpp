#include "afrda/random.hpp"

#include <cmath>
#include <sstream>

namespace afrda {

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng)
{
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data())
        v = uniform(rng, -bound, bound);
    return t;
}

std::string serialize_rng(const Rng& rng)
{
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng deserialize_rng(const std::string& text)
{
    std::istringstream is(text);
    Rng rng;
    is >> rng;
    if (!is)
        throw DomainError("malformed generator state");
    return rng;
}

}  // namespace afrda
