// lines25_p4_fp32: p = 4, 100 threads, 4 elements per block, method lines-25

__constant__ float cmem[25] = {-5.067040443e0f, 7.701951981e0f, -4.043543816e0f, 1.960399151e0f, -5.517668724e-1f, -9.602560401e-1f, -7.583532333e-1f, 2.402750731e0f, -9.285580516e-1f, 2.444166094e-1f, 3.011681736e-1f, -1.435388207e0f, -1.665334537e-16f, 1.435388207e0f, -3.011681736e-1f, -2.444166094e-1f, 9.285580516e-1f, -2.402750731e0f, 7.583532333e-1f, 9.602560401e-1f, 5.517668724e-1f, -1.960399151e0f, 4.043543816e0f, -7.701951981e0f, 5.067040443e0f};

extern "C" __global__ void __launch_bounds__(100)
lines25_p4_fp32(const int n_elem, const float* __restrict__ u, float* __restrict__ out, const float zeta, const float neg_nu, const float neg_inv_t, const float neg_jac_x, const float neg_jac_y, const float neg_jac_z, const float neg_zeta_t)
{
    __shared__ float smem[12500];
    const int tid = threadIdx.x;
    const int bid = blockIdx.x;
    const int e_l = (tid % 4);
    const int i = ((tid / 4) % 5);
    const int j = ((tid / 20) % 5);
    const int e_g = (e_l + (bid * 4));
    const int g = (((e_g / 32) * 52000) + (e_g % 32));
    const int g_o = ((g + (i * 32)) + (j * 160));
    const int g_x = (g + (j * 160));
    const int g_y = (g + (i * 32));
    const int s_o = ((e_l + (i * 4)) + (j * 20));
    const int s_x = (e_l + (j * 20));
    const int s_y = (e_l + (i * 4));
    const int d_i = (i * 5);
    const int d_j = (j * 5);
    const bool active = e_g < n_elem;
    float r0, r1, r2, r3, r4, r5, r6, r7, r8, r9, r10, r11, r12, r13, r14, r15;
    float r16, r17, r18, r19, r20, r21, r22, r23, r24, r25, r26, r27, r28, r29, r30, r31;
    float r32, r33, r34, r35, r36, r37, r38, r39, r40, r41, r42, r43, r44, r45, r46, r47;
    float r48, r49, r50, r51, r52, r53, r54, r55, r56, r57, r58, r59, r60, r61, r62, r63;
    float r64, r65, r66, r67, r68, r69, r70, r71, r72, r73, r74, r75, r76, r77, r78, r79;
    float r80, r81, r82, r83, r84, r85, r86, r87, r88, r89, r90, r91, r92;
    
    for (int L0 = 0; L0 < 5; ++L0) {
        if (active) r0 = __ldlu(&u[g_o + 4000 + 800 * L0]);
        if (active) smem[s_o + 100 * L0] = r0;
        if (active) r1 = __ldlu(&u[g_o + 8000 + 800 * L0]);
        if (active) smem[s_o + 500 + 100 * L0] = r1;
        if (active) r2 = __ldlu(&u[g_o + 12000 + 800 * L0]);
        if (active) smem[s_o + 1000 + 100 * L0] = r2;
        if (active) r3 = __ldlu(&u[g_o + 16000 + 800 * L0]);
        if (active) r4 = __ldlu(&u[g_o + 800 * L0]);
        r5 = fmaf(neg_nu, r3, r4);
        if (active) smem[s_o + 1500 + 100 * L0] = r5;
        if (active) r6 = __ldlu(&u[g_o + 20000 + 800 * L0]);
        r7 = neg_nu * r6;
        if (active) smem[s_o + 2000 + 100 * L0] = r7;
        if (active) r8 = __ldlu(&u[g_o + 24000 + 800 * L0]);
        r9 = neg_nu * r8;
        if (active) smem[s_o + 2500 + 100 * L0] = r9;
        if (active) r10 = __ldlu(&u[g_o + 28000 + 800 * L0]);
        r11 = neg_nu * r10;
        if (active) smem[s_o + 3000 + 100 * L0] = r11;
        if (active) r12 = __ldlu(&u[g_o + 32000 + 800 * L0]);
        r13 = fmaf(neg_nu, r12, r4);
        if (active) smem[s_o + 3500 + 100 * L0] = r13;
        if (active) r14 = __ldlu(&u[g_o + 36000 + 800 * L0]);
        r15 = neg_nu * r14;
        if (active) smem[s_o + 4000 + 100 * L0] = r15;
        if (active) r16 = __ldlu(&u[g_o + 40000 + 800 * L0]);
        r17 = neg_nu * r16;
        if (active) smem[s_o + 4500 + 100 * L0] = r17;
        if (active) r18 = __ldlu(&u[g_o + 44000 + 800 * L0]);
        r19 = neg_nu * r18;
        if (active) smem[s_o + 5000 + 100 * L0] = r19;
        if (active) r20 = __ldlu(&u[g_o + 48000 + 800 * L0]);
        r21 = fmaf(neg_nu, r20, r4);
        if (active) smem[s_o + 5500 + 100 * L0] = r21;
        __syncthreads();
        r22 = 0.000000000e0f;
        r23 = 0.000000000e0f;
        r24 = 0.000000000e0f;
        r25 = 0.000000000e0f;
        r26 = 0.000000000e0f;
        r27 = 0.000000000e0f;
        r28 = 0.000000000e0f;
        r29 = 0.000000000e0f;
        r30 = 0.000000000e0f;
        r31 = 0.000000000e0f;
        r32 = 0.000000000e0f;
        r33 = 0.000000000e0f;
        r34 = 0.000000000e0f;
        for (int L1 = 0; L1 < 5; ++L1) {
            r35 = cmem[d_i + 1 * L1];
            r36 = r35 * neg_jac_x;
            if (active) r37 = smem[s_x + 100 * L0 + 4 * L1];
            if (active) r38 = smem[s_x + 500 + 100 * L0 + 4 * L1];
            if (active) r39 = smem[s_x + 1000 + 100 * L0 + 4 * L1];
            if (active) r40 = smem[s_x + 1500 + 100 * L0 + 4 * L1];
            if (active) r41 = smem[s_x + 3000 + 100 * L0 + 4 * L1];
            if (active) r42 = smem[s_x + 4500 + 100 * L0 + 4 * L1];
            r43 = zeta * r37;
            r44 = fmaf(r37, r37, r40);
            r45 = fmaf(r38, r37, r41);
            r46 = fmaf(r39, r37, r42);
            r47 = r37 * neg_inv_t;
            r48 = r38 * neg_inv_t;
            r49 = r39 * neg_inv_t;
            r22 = fmaf(r36, r43, r22);
            r23 = fmaf(r36, r44, r23);
            r24 = fmaf(r36, r45, r24);
            r25 = fmaf(r36, r46, r25);
            r26 = fmaf(r36, r47, r26);
            r29 = fmaf(r36, r48, r29);
            r32 = fmaf(r36, r49, r32);
        }
        for (int L2 = 0; L2 < 5; ++L2) {
            r50 = cmem[d_j + 1 * L2];
            r51 = r50 * neg_jac_y;
            if (active) r52 = smem[s_y + 100 * L0 + 20 * L2];
            if (active) r53 = smem[s_y + 500 + 100 * L0 + 20 * L2];
            if (active) r54 = smem[s_y + 1000 + 100 * L0 + 20 * L2];
            if (active) r55 = smem[s_y + 2000 + 100 * L0 + 20 * L2];
            if (active) r56 = smem[s_y + 3500 + 100 * L0 + 20 * L2];
            if (active) r57 = smem[s_y + 5000 + 100 * L0 + 20 * L2];
            r58 = zeta * r53;
            r59 = fmaf(r52, r53, r55);
            r60 = fmaf(r53, r53, r56);
            r61 = fmaf(r54, r53, r57);
            r62 = r52 * neg_inv_t;
            r63 = r53 * neg_inv_t;
            r64 = r54 * neg_inv_t;
            r22 = fmaf(r51, r58, r22);
            r23 = fmaf(r51, r59, r23);
            r24 = fmaf(r51, r60, r24);
            r25 = fmaf(r51, r61, r25);
            r27 = fmaf(r51, r62, r27);
            r30 = fmaf(r51, r63, r30);
            r33 = fmaf(r51, r64, r33);
        }
        if (active) smem[s_o + 6000 + 100 * L0] = r22;
        if (active) smem[s_o + 6500 + 100 * L0] = r23;
        if (active) smem[s_o + 7000 + 100 * L0] = r24;
        if (active) smem[s_o + 7500 + 100 * L0] = r25;
        if (active) smem[s_o + 8000 + 100 * L0] = r26;
        if (active) smem[s_o + 8500 + 100 * L0] = r27;
        if (active) smem[s_o + 9000 + 100 * L0] = r28;
        if (active) smem[s_o + 9500 + 100 * L0] = r29;
        if (active) smem[s_o + 10000 + 100 * L0] = r30;
        if (active) smem[s_o + 10500 + 100 * L0] = r31;
        if (active) smem[s_o + 11000 + 100 * L0] = r32;
        if (active) smem[s_o + 11500 + 100 * L0] = r33;
        if (active) smem[s_o + 12000 + 100 * L0] = r34;
    }
    __syncthreads();
    for (int L3 = 0; L3 < 5; ++L3) {
        if (active) r65 = smem[s_o + 6000 + 100 * L3];
        if (active) r66 = smem[s_o + 6500 + 100 * L3];
        if (active) r67 = smem[s_o + 7000 + 100 * L3];
        if (active) r68 = smem[s_o + 7500 + 100 * L3];
        if (active) r69 = smem[s_o + 8000 + 100 * L3];
        if (active) r70 = smem[s_o + 8500 + 100 * L3];
        if (active) r71 = smem[s_o + 9000 + 100 * L3];
        if (active) r72 = smem[s_o + 9500 + 100 * L3];
        if (active) r73 = smem[s_o + 10000 + 100 * L3];
        if (active) r74 = smem[s_o + 10500 + 100 * L3];
        if (active) r75 = smem[s_o + 11000 + 100 * L3];
        if (active) r76 = smem[s_o + 11500 + 100 * L3];
        if (active) r77 = smem[s_o + 12000 + 100 * L3];
        for (int L4 = 0; L4 < 5; ++L4) {
            r78 = cmem[0 + 5 * L3 + 1 * L4];
            r79 = r78 * neg_jac_z;
            if (active) r80 = smem[s_o + 100 * L4];
            if (active) r81 = smem[s_o + 500 + 100 * L4];
            if (active) r82 = smem[s_o + 1000 + 100 * L4];
            if (active) r83 = smem[s_o + 2500 + 100 * L4];
            if (active) r84 = smem[s_o + 4000 + 100 * L4];
            if (active) r85 = smem[s_o + 5500 + 100 * L4];
            r86 = zeta * r82;
            r87 = fmaf(r80, r82, r83);
            r88 = fmaf(r81, r82, r84);
            r89 = fmaf(r82, r82, r85);
            r90 = r80 * neg_inv_t;
            r91 = r81 * neg_inv_t;
            r92 = r82 * neg_inv_t;
            r65 = fmaf(r79, r86, r65);
            r66 = fmaf(r79, r87, r66);
            r67 = fmaf(r79, r88, r67);
            r68 = fmaf(r79, r89, r68);
            r71 = fmaf(r79, r90, r71);
            r74 = fmaf(r79, r91, r74);
            r77 = fmaf(r79, r92, r77);
        }
        if (active) out[g_o + 800 * L3] = r65;
        if (active) out[g_o + 4000 + 800 * L3] = r66;
        if (active) out[g_o + 8000 + 800 * L3] = r67;
        if (active) out[g_o + 12000 + 800 * L3] = r68;
        if (active) out[g_o + 16000 + 800 * L3] = r69;
        if (active) out[g_o + 20000 + 800 * L3] = r70;
        if (active) out[g_o + 24000 + 800 * L3] = r71;
        if (active) out[g_o + 28000 + 800 * L3] = r72;
        if (active) out[g_o + 32000 + 800 * L3] = r73;
        if (active) out[g_o + 36000 + 800 * L3] = r74;
        if (active) out[g_o + 40000 + 800 * L3] = r75;
        if (active) out[g_o + 44000 + 800 * L3] = r76;
        if (active) out[g_o + 48000 + 800 * L3] = r77;
    }
}
