# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kinematics kernels.

Same contract as ``_kernels_py`` (the pure-numpy fallback); see that module
for the argument layout. Joint type codes: 0 revolute, 1 prismatic, 2 fixed.
"""

from libc.math cimport cos, sin, sqrt

COMPILED = True


cdef inline void _qmul(const double* a, const double* b, double* out) nogil:
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]


cdef inline void _qrot(const double* q, const double* v, double* out) nogil:
    cdef double tx = 2.0 * (q[2] * v[2] - q[3] * v[1])
    cdef double ty = 2.0 * (q[3] * v[0] - q[1] * v[2])
    cdef double tz = 2.0 * (q[1] * v[1] - q[2] * v[0])
    out[0] = v[0] + q[0] * tx + (q[2] * tz - q[3] * ty)
    out[1] = v[1] + q[0] * ty + (q[3] * tx - q[1] * tz)
    out[2] = v[2] + q[0] * tz + (q[1] * ty - q[2] * tx)


def fk_chain(const int[::1] parent_link, const int[::1] child_link,
             const int[::1] jtype, const double[:, ::1] axis,
             const double[:, ::1] origin_t, const double[:, ::1] origin_q,
             const int[::1] qidx, const double[::1] q,
             const double[::1] root_t, const double[::1] root_q,
             double[:, ::1] link_t, double[:, ::1] link_q):
    cdef Py_ssize_t n_joints = parent_link.shape[0]
    cdef Py_ssize_t j
    cdef int p, c, code
    cdef double t1[3]
    cdef double q1[4]
    cdef double qj[4]
    cdef double tmp[3]
    cdef double half, s, val, norm

    link_t[0, 0] = root_t[0]
    link_t[0, 1] = root_t[1]
    link_t[0, 2] = root_t[2]
    link_q[0, 0] = root_q[0]
    link_q[0, 1] = root_q[1]
    link_q[0, 2] = root_q[2]
    link_q[0, 3] = root_q[3]

    with nogil:
        for j in range(n_joints):
            p = parent_link[j]
            c = child_link[j]
            _qrot(&link_q[p, 0], &origin_t[j, 0], t1)
            t1[0] += link_t[p, 0]
            t1[1] += link_t[p, 1]
            t1[2] += link_t[p, 2]
            _qmul(&link_q[p, 0], &origin_q[j, 0], q1)
            code = jtype[j]
            if code == 0:
                half = 0.5 * q[qidx[j]]
                s = sin(half)
                qj[0] = cos(half)
                qj[1] = s * axis[j, 0]
                qj[2] = s * axis[j, 1]
                qj[3] = s * axis[j, 2]
                _qmul(q1, qj, &link_q[c, 0])
                link_t[c, 0] = t1[0]
                link_t[c, 1] = t1[1]
                link_t[c, 2] = t1[2]
            elif code == 1:
                val = q[qidx[j]]
                tmp[0] = axis[j, 0] * val
                tmp[1] = axis[j, 1] * val
                tmp[2] = axis[j, 2] * val
                _qrot(q1, tmp, &link_t[c, 0])
                link_t[c, 0] += t1[0]
                link_t[c, 1] += t1[1]
                link_t[c, 2] += t1[2]
                link_q[c, 0] = q1[0]
                link_q[c, 1] = q1[1]
                link_q[c, 2] = q1[2]
                link_q[c, 3] = q1[3]
            else:
                link_t[c, 0] = t1[0]
                link_t[c, 1] = t1[1]
                link_t[c, 2] = t1[2]
                link_q[c, 0] = q1[0]
                link_q[c, 1] = q1[1]
                link_q[c, 2] = q1[2]
                link_q[c, 3] = q1[3]
            norm = sqrt(link_q[c, 0] * link_q[c, 0] + link_q[c, 1] * link_q[c, 1]
                        + link_q[c, 2] * link_q[c, 2] + link_q[c, 3] * link_q[c, 3])
            link_q[c, 0] /= norm
            link_q[c, 1] /= norm
            link_q[c, 2] /= norm
            link_q[c, 3] /= norm


def keypoint_jacobian_cols(const double[:, ::1] link_t, const double[:, ::1] link_q,
                           const int[::1] path, const int[::1] jtype,
                           const double[:, ::1] axis, const int[::1] qidx,
                           const int[::1] child_link, const double[::1] kp_pos,
                           double[:, ::1] jac):
    cdef Py_ssize_t n_path = path.shape[0]
    cdef Py_ssize_t i
    cdef int j, c, col
    cdef double aw[3]
    cdef double dx, dy, dz

    with nogil:
        for i in range(n_path):
            j = path[i]
            col = qidx[j]
            if col < 0:
                continue
            c = child_link[j]
            _qrot(&link_q[c, 0], &axis[j, 0], aw)
            if jtype[j] == 0:
                dx = kp_pos[0] - link_t[c, 0]
                dy = kp_pos[1] - link_t[c, 1]
                dz = kp_pos[2] - link_t[c, 2]
                jac[0, col] = aw[1] * dz - aw[2] * dy
                jac[1, col] = aw[2] * dx - aw[0] * dz
                jac[2, col] = aw[0] * dy - aw[1] * dx
                jac[3, col] = aw[0]
                jac[4, col] = aw[1]
                jac[5, col] = aw[2]
            elif jtype[j] == 1:
                jac[0, col] = aw[0]
                jac[1, col] = aw[1]
                jac[2, col] = aw[2]
