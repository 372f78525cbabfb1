#include "mpcs/trace.hpp"

#include <sstream>

namespace mpcs {

std::string to_string(RunClass cls) {
  switch (cls) {
    case RunClass::Converged: return "converged";
    case RunClass::Diverged: return "diverged";
    case RunClass::MaxSteps: return "max-steps";
    case RunClass::InfeasibleAt: return "infeasible";
  }
  return "unknown";
}

std::string ClosedLoopTrace::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  const int n = steps.empty() ? static_cast<int>(x_final.size())
                              : static_cast<int>(steps.front().x.size());
  const int m = steps.empty() ? 0 : static_cast<int>(steps.front().u.size());
  os << "k";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  for (int i = 1; i <= m; ++i) os << ",u" << i;
  os << ",J_star,alpha,thm1_margin,thm2_margin,class\n";
  std::string cls = to_string(classification);
  if (classification == RunClass::InfeasibleAt) cls += "-at-" + std::to_string(infeasible_k);
  for (const TraceStep& s : steps) {
    os << s.k;
    for (int i = 0; i < n; ++i) os << ',' << s.x[i];
    for (int i = 0; i < m; ++i) os << ',' << s.u[i];
    os << ',';
    if (s.j_star) os << *s.j_star;
    os << ',';
    if (s.alpha) os << *s.alpha;
    os << ',';
    if (s.thm1) os << s.thm1->margin;
    os << ',';
    if (s.thm2) os << s.thm2->margin;
    os << ',' << cls << '\n';
  }
  return os.str();
}

std::string ClosedLoopTrace::certificates_csv() const {
  std::ostringstream os;
  os << "kind,k,lhs,rhs,margin,verdict\n";
  for (const TraceStep& s : steps) {
    if (s.thm1) os << s.thm1->csv_row() << '\n';
    if (s.thm2) os << s.thm2->csv_row() << '\n';
  }
  return os.str();
}

Classifier::Classifier(const Vec& x0, const ClassifyRules& rules)
    : rules_(rules), x0_norm_(x0.norm()) {}

void Classifier::observe(const Vec& x, int k) {
  if (done_) return;
  const double norm = x.norm();
  if (norm > rules_.diverge_norm || norm > rules_.diverge_factor * x0_norm_) {
    done_ = true;
    class_ = RunClass::Diverged;
    return;
  }
  if (norm < rules_.converge_norm) {
    ++streak_;
    if (streak_ >= rules_.converge_consecutive) {
      done_ = true;
      class_ = RunClass::Converged;
      converged_at_ = k - rules_.converge_consecutive + 1;
    }
  } else {
    streak_ = 0;
  }
}

}  // namespace mpcs
