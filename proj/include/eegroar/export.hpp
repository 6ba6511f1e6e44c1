#ifndef EEGROAR_EXPORT_HPP
#define EEGROAR_EXPORT_HPP

#include <string>
#include <vector>

#include "eegroar/attribution.hpp"
#include "eegroar/roar.hpp"
#include "eegroar/stats.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar {

/// 17-significant-digit decimal rendering; round-trips doubles exactly.
std::string format_real(Real v);

/// Binary (P5) grayscale heatmap; values are expected in [-1, 1] and are
/// mapped linearly onto 0..255.
void write_pgm(const Tensord& map, const std::string& path);

/// Map CSV (channels rows x samples columns) plus a one-line .meta sidecar
/// carrying method, class, normalized flag, and seed.
void write_relevance_csv(const RelevanceMap& map, const std::string& path,
                         std::uint64_t seed);

void write_mask_csv(const BinaryMask& mask, const std::string& path);

/// Long-format curve table: method,r,subject,accuracy.
void write_curves_csv(const std::vector<RoarCurve>& curves,
                      const std::vector<std::string>& subjects,
                      const std::string& path);

/// Summary table: method,r,mean_accuracy,std_accuracy,partial.
void write_curve_summary_csv(const std::vector<RoarCurve>& curves,
                             const std::string& path);

/// channel,<window labels...> header then one row per channel.
void write_window_aggregate_csv(const ColMatrix<Real>& aggregate,
                                const std::vector<std::pair<Index, Index>>& windows,
                                const std::string& path);

}  // namespace eegroar

#endif  // EEGROAR_EXPORT_HPP
