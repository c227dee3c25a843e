"""Pure-numpy kernel fallback.

Mirrors the compiled extension in ``_kernels.pyx``: same signatures, same
arithmetic, selected by ``keymotion._backend`` when the extension is absent
(or forced via KEYMOTION_BACKEND=pure). Joint arrays are the flattened model
produced by ``kinematics.KinematicModel``; joints must arrive in topological
order with the root link at index 0.

Joint type codes: 0 revolute, 1 prismatic, 2 fixed.
"""

from __future__ import annotations

import numpy as np

COMPILED = False


def _qmul(a, b, out):
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]


def _qrot(q, v, out):
    tx = 2.0 * (q[2] * v[2] - q[3] * v[1])
    ty = 2.0 * (q[3] * v[0] - q[1] * v[2])
    tz = 2.0 * (q[1] * v[1] - q[2] * v[0])
    out[0] = v[0] + q[0] * tx + (q[2] * tz - q[3] * ty)
    out[1] = v[1] + q[0] * ty + (q[3] * tx - q[1] * tz)
    out[2] = v[2] + q[0] * tz + (q[1] * ty - q[2] * tx)


def fk_chain(parent_link, child_link, jtype, axis, origin_t, origin_q,
             qidx, q, root_t, root_q, link_t, link_q):
    """Forward kinematics over the flattened joint arrays.

    Writes world translation/quaternion of every link into ``link_t`` (L,3)
    and ``link_q`` (L,4).
    """
    link_t[0] = root_t
    link_q[0] = root_q
    t1 = np.empty(3)
    q1 = np.empty(4)
    qj = np.empty(4)
    tmp = np.empty(3)
    for j in range(parent_link.shape[0]):
        p = parent_link[j]
        c = child_link[j]
        _qrot(link_q[p], origin_t[j], t1)
        t1 += link_t[p]
        _qmul(link_q[p], origin_q[j], q1)
        code = jtype[j]
        if code == 0:
            half = 0.5 * q[qidx[j]]
            s = np.sin(half)
            qj[0] = np.cos(half)
            qj[1] = s * axis[j, 0]
            qj[2] = s * axis[j, 1]
            qj[3] = s * axis[j, 2]
            _qmul(q1, qj, link_q[c])
            link_t[c] = t1
        elif code == 1:
            val = q[qidx[j]]
            tmp[0] = axis[j, 0] * val
            tmp[1] = axis[j, 1] * val
            tmp[2] = axis[j, 2] * val
            _qrot(q1, tmp, link_t[c])
            link_t[c] += t1
            link_q[c] = q1
        else:
            link_t[c] = t1
            link_q[c] = q1
        norm = np.sqrt(
            link_q[c, 0] ** 2 + link_q[c, 1] ** 2 + link_q[c, 2] ** 2 + link_q[c, 3] ** 2
        )
        link_q[c] /= norm


def keypoint_jacobian_cols(link_t, link_q, path, jtype, axis, qidx,
                           child_link, kp_pos, jac):
    """Fill geometric-Jacobian columns (world frame) for joints on ``path``.

    ``jac`` is (6, dof), rows = [linear; angular], zeroed by the caller.
    Fixed joints contribute nothing.
    """
    aw = np.empty(3)
    for i in range(path.shape[0]):
        j = path[i]
        col = qidx[j]
        if col < 0:
            continue
        c = child_link[j]
        _qrot(link_q[c], axis[j], aw)
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
