#include "chaostats/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace chaostats {
namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// kind: 0 r2c1d, 1 c2r1d, 2 r2c2d, 3 c2r2d, 4 r2c3d, 5 c2r3d
using PlanKey = std::tuple<int, int, int, int, int>;

struct PlanEntry {
    fftw_plan plan = nullptr;
    size_t real_len = 0, cplx_len = 0;
};

struct ThreadCache {
    std::map<PlanKey, PlanEntry> plans;
    std::vector<std::complex<double>> cscratch;

    ~ThreadCache() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        for (auto& [k, e] : plans) fftw_destroy_plan(e.plan);
    }

    PlanEntry& get(int kind, int n0, int n1, int n2, int howmany) {
        PlanKey key{kind, n0, n1, n2, howmany};
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;

        PlanEntry e;
        const int rank = kind / 2 + 1;
        const int last = (rank == 1 ? n0 : rank == 2 ? n1 : n2);
        const int mlast = last / 2 + 1;
        size_t rlen = size_t(n0), clen = size_t(n0);
        if (rank >= 2) { rlen *= size_t(n1); clen *= size_t(n1); }
        if (rank == 3) { rlen *= size_t(n2); clen *= size_t(n2); }
        clen = clen / size_t(last) * size_t(mlast);
        rlen *= size_t(howmany);
        clen *= size_t(howmany);
        e.real_len = rlen;
        e.cplx_len = clen;

        // plan on dedicated aligned buffers, execute on caller arrays via the
        // new-array interface; FFTW_UNALIGNED keeps that valid for any pointer
        double* rbuf = fftw_alloc_real(rlen);
        fftw_complex* cbuf = fftw_alloc_complex(clen);
        {
            std::lock_guard<std::mutex> lock(planner_mutex());
            const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
            int dims[3] = {n0, n1, n2};
            const int rdist = int(rlen / size_t(howmany));
            const int cdist = int(clen / size_t(howmany));
            if (kind % 2 == 0)
                e.plan = fftw_plan_many_dft_r2c(rank, dims, howmany, rbuf, nullptr, 1, rdist,
                                                cbuf, nullptr, 1, cdist, flags);
            else
                e.plan = fftw_plan_many_dft_c2r(rank, dims, howmany, cbuf, nullptr, 1, cdist,
                                                rbuf, nullptr, 1, rdist, flags);
        }
        fftw_free(rbuf);
        fftw_free(cbuf);
        if (!e.plan) throw std::runtime_error("fft: FFTW failed to produce a plan");
        return plans.emplace(key, e).first->second;
    }
};

ThreadCache& cache() {
    thread_local ThreadCache tc;
    return tc;
}

} // namespace

namespace {

void run_r2c(int kind, int n0, int n1, int n2, int howmany, const double* in,
             std::complex<double>* out) {
    auto& e = cache().get(kind, n0, n1, n2, howmany);
    fftw_execute_dft_r2c(e.plan, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

// FFTW's c2r clobbers its input; keep the caller's array intact
void run_c2r(int kind, int n0, int n1, int n2, int howmany, const std::complex<double>* in,
             double* out) {
    auto& tc = cache();
    auto& e = tc.get(kind, n0, n1, n2, howmany);
    if (tc.cscratch.size() < e.cplx_len) tc.cscratch.resize(e.cplx_len);
    std::memcpy(tc.cscratch.data(), in, e.cplx_len * sizeof(std::complex<double>));
    fftw_execute_dft_c2r(e.plan, reinterpret_cast<fftw_complex*>(tc.cscratch.data()), out);
}

} // namespace

void fft_r2c_1d(int n, int howmany, const double* in, std::complex<double>* out) {
    run_r2c(0, n, 0, 0, howmany, in, out);
}

void fft_c2r_1d(int n, int howmany, const std::complex<double>* in, double* out) {
    run_c2r(1, n, 0, 0, howmany, in, out);
}

void fft_r2c_2d(int n0, int n1, int howmany, const double* in, std::complex<double>* out) {
    run_r2c(2, n0, n1, 0, howmany, in, out);
}

void fft_c2r_2d(int n0, int n1, int howmany, const std::complex<double>* in, double* out) {
    run_c2r(3, n0, n1, 0, howmany, in, out);
}

void fft_r2c_3d(int n0, int n1, int n2, int howmany, const double* in,
                std::complex<double>* out) {
    run_r2c(4, n0, n1, n2, howmany, in, out);
}

void fft_c2r_3d(int n0, int n1, int n2, int howmany, const std::complex<double>* in,
                double* out) {
    run_c2r(5, n0, n1, n2, howmany, in, out);
}

void fft_clear_thread_cache() {
    auto& tc = cache();
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        for (auto& [k, e] : tc.plans) fftw_destroy_plan(e.plan);
    }
    tc.plans.clear();
    tc.cscratch.clear();
    tc.cscratch.shrink_to_fit();
}

} // namespace chaostats
