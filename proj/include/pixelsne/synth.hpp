#pragma once

#include <string>
#include <utility>

#include "pixelsne/core.hpp"
#include "pixelsne/rng.hpp"

namespace pixelsne {

/// Deterministic Gaussian-mixture generator: cluster centers drawn from
/// N(0, 10 I), unit-variance points around them, labels are cluster ids.
/// Items are assigned to clusters round-robin so sizes are balanced.
inline std::pair<DataMatrix, LabelVector> gaussian_mixture(std::size_t clusters, std::size_t n,
                                                           std::size_t dims,
                                                           std::uint64_t seed) {
    if (clusters < 1 || n < 2 || dims < 1)
        throw std::invalid_argument("gaussian_mixture: need clusters >= 1, n >= 2, dims >= 1");
    Rng rng(Rng::derive(seed, 0xc1a55e5));
    std::vector<double> centers(clusters * dims);
    for (auto& v : centers) v = 10.0 * rng.next_gaussian();

    DataMatrix m;
    m.n_items = n;
    m.n_dims = dims;
    m.values.resize(n * dims);
    LabelVector labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % clusters;
        for (std::size_t d = 0; d < dims; ++d)
            m.values[i * dims + d] = centers[c * dims + d] + rng.next_gaussian();
        labels[i] = std::to_string(c);
    }
    return {std::move(m), std::move(labels)};
}

/// Parses a generator spec of the form "gaussians:C:N:D".
struct SynthSpec {
    std::size_t clusters = 0, n_items = 0, dims = 0;

    static SynthSpec parse(const std::string& text) {
        SynthSpec s;
        const char* fail = "synth spec must look like gaussians:C:N:D";
        std::size_t pos = text.find(':');
        if (pos == std::string::npos || text.substr(0, pos) != "gaussians")
            throw std::invalid_argument(fail);
        std::size_t fields[3];
        std::size_t start = pos + 1;
        for (int f = 0; f < 3; ++f) {
            const std::size_t next = text.find(':', start);
            const std::string part = next == std::string::npos ? text.substr(start)
                                                               : text.substr(start, next - start);
            if (part.empty() || (f < 2) != (next != std::string::npos))
                throw std::invalid_argument(fail);
            fields[f] = static_cast<std::size_t>(std::stoull(part));
            start = next + 1;
        }
        s.clusters = fields[0];
        s.n_items = fields[1];
        s.dims = fields[2];
        return s;
    }
};

}  // namespace pixelsne
