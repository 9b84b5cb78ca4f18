#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "convexnet/common.hpp"
#include "convexnet/training.hpp"

namespace convexnet {

/// %.10g rendering used in every CSV so identical runs are byte-identical.
inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::ofstream open_csv(const std::string& path, const std::string& header) {
    std::ofstream os(path);
    if (!os.good()) throw config_error("cannot open output file: " + path);
    os << header << "\n";
    return os;
}

inline void write_loss_trace_csv(const LossTrace& trace, const std::string& path) {
    std::ofstream os = open_csv(path, "iter,loss,lr");
    for (const LossTracePoint& p : trace)
        os << p.iteration << "," << csv_number(p.loss) << "," << csv_number(p.rate) << "\n";
}

} // namespace convexnet
