#include "quadmpc/csv_log.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace quadmpc {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void write_log(const ScenarioResult& result, std::ostream& out) {
  out << "t,x,y,z,roll,pitch,yaw,vx,vy,vz,wx,wy,wz";
  for (const char* leg : kLegNames) out << ',' << leg << "_contact," << leg << "_fx," << leg << "_fy," << leg << "_fz";
  out << ",gait_mode,solver_status,kkt_residual,solve_ms,support_margin,event\n";
  for (const TickRecord& r : result.log) {
    const RobotState& b = r.body;
    out << num(r.t);
    for (const Vec3* v : {&b.position, &b.euler, &b.velocity, &b.omega})
      for (int j = 0; j < 3; ++j) out << ',' << num((*v)(j));
    for (int i = 0; i < kNumLegs; ++i) {
      out << ',' << (r.contact[i] ? 1 : 0);
      for (int j = 0; j < 3; ++j) out << ',' << num(r.force[i](j));
    }
    out << ',' << r.gait_mode << ',' << r.solver_status << ',' << num(r.kkt_residual) << ',' << num(r.solve_ms) << ','
        << num(r.support_margin) << ',' << r.event << '\n';
  }
}

void write_log(const ScenarioResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open log file for writing: " + path.string());
  write_log(result, out);
  out.flush();
  if (!out) throw Error("failed writing log file: " + path.string());
}

}  // namespace quadmpc
