#include "eegroar/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "eegroar/data.hpp"

namespace eegroar {

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_pgm(const Tensord& map, const std::string& path) {
  if (map.rank() != 2) throw std::invalid_argument("write_pgm expects rank 2");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "P5\n" << map.extent(1) << " " << map.extent(0) << "\n255\n";
  for (Index i = 0; i < map.size(); ++i) {
    const Real v = std::clamp(map[i], Real(-1), Real(1));
    const int gray = static_cast<int>(std::lround((v + 1.0) * 127.5));
    os.put(static_cast<char>(std::clamp(gray, 0, 255)));
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

void write_relevance_csv(const RelevanceMap& map, const std::string& path,
                         std::uint64_t seed) {
  save_matrix_csv(map.data, path);
  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("cannot open " + path + ".meta");
  meta << "method=" << map.method << ",class=" << map.target_class
       << ",normalized=" << (map.normalized ? 1 : 0) << ",seed=" << seed
       << "\n";
}

void write_mask_csv(const BinaryMask& mask, const std::string& path) {
  save_matrix_csv(mask.data, path);
}

void write_curves_csv(const std::vector<RoarCurve>& curves,
                      const std::vector<std::string>& subjects,
                      const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "method,r,subject,accuracy\n";
  for (const RoarCurve& c : curves) {
    for (const RoarCurvePoint& p : c.points) {
      if (p.per_subject.size() != subjects.size())
        throw std::logic_error("curve subject count mismatch");
      for (std::size_t s = 0; s < subjects.size(); ++s)
        os << c.tag << "," << format_real(p.r) << "," << subjects[s] << ","
           << format_real(p.per_subject[s]) << "\n";
    }
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

void write_curve_summary_csv(const std::vector<RoarCurve>& curves,
                             const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "method,r,mean_accuracy,std_accuracy,partial\n";
  for (const RoarCurve& c : curves)
    for (const RoarCurvePoint& p : c.points)
      os << c.tag << "," << format_real(p.r) << ","
         << format_real(p.mean_accuracy) << "," << format_real(p.std_accuracy)
         << "," << (p.partial ? 1 : 0) << "\n";
  if (!os) throw std::runtime_error("failed writing " + path);
}

void write_window_aggregate_csv(
    const ColMatrix<Real>& aggregate,
    const std::vector<std::pair<Index, Index>>& windows,
    const std::string& path) {
  if (aggregate.cols() != static_cast<Index>(windows.size()))
    throw std::invalid_argument("window aggregate column count mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "channel";
  for (const auto& [b, e] : windows) os << ",w" << b << "_" << e;
  os << "\n";
  for (Index c = 0; c < aggregate.rows(); ++c) {
    os << c;
    for (Index w = 0; w < aggregate.cols(); ++w)
      os << "," << format_real(aggregate(c, w));
    os << "\n";
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

}  // namespace eegroar
